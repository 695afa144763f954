import logging

import numpy as np
from scipy.integrate import trapezoid

from domain.field import HamiltonianField, _call, field_from_table, sample_hamiltonian
from shared.errors import InvalidField

logger = logging.getLogger(__name__)

MIN_TIME_SLICES = 8


def time_average(H: HamiltonianField, T: float = 1.0) -> HamiltonianField:
    """
    Average a 1-periodic field over one period with the trapezoidal rule.

    Args:
        H: time-dependent field with at least 8 slices (autonomous fields pass through)
        T: averaging window, a positive integer number of periods

    Returns:
        Autonomous HamiltonianField
    """
    if H.is_autonomous:
        return H
    if T <= 0 or abs(T - round(T)) > 1e-12:
        raise ValueError(f"averaging window must be a whole number of periods, got T={T}")
    n_t = H.time_slices.shape[0]
    if n_t < MIN_TIME_SLICES:
        raise InvalidField(f"time averaging needs at least {MIN_TIME_SLICES} slices, field '{H.name}' has {n_t}")

    nodes = np.linspace(0.0, 1.0, n_t + 1)
    closed = np.concatenate([H.time_slices, H.time_slices[:1]], axis=0)
    mean = trapezoid(closed, nodes, axis=0)
    name = f"avg({H.name})"
    if H.time_closure is not None:
        fn = H.time_closure

        def averaged(q, p):
            samples = np.stack([_call(fn, s, q, p) for s in nodes])
            return trapezoid(samples, nodes, axis=0)

        return sample_hamiltonian(averaged, H.qgrid, H.pgrid, H.interpolation, name=name,
                                  metadata={"averaged_slices": n_t})
    return field_from_table(mean, H.qgrid, H.pgrid, interpolation=H.interpolation, name=name,
                            metadata={"averaged_slices": n_t})
