"""
Lax-Oleinik semigroup on the circle.

One step is the inf-convolution
    u'(x) = min over xi of u(x - tau xi) + tau L(x - tau xi, xi)
over the velocity nodes of L, with u and L interpolated linearly on the
lifted circle. The scheme is monotone in u.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from domain.grids import TorusGrid
from shared.errors import GridMismatch, WindowTooSmall

from .legendre import LagrangianTable

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """u(q) on the torus grid after time t of the tilted semigroup."""
    qgrid: TorusGrid
    values: np.ndarray
    t: float = 0.0
    tilt: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.qgrid.n_nodes,):
            raise ValueError(f"expected {self.qgrid.n_nodes} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("value function must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, qgrid: TorusGrid, c: float = 0.0, tilt: float = 0.0) -> "ValueFunction":
        return cls(qgrid, np.full(qgrid.n_nodes, float(c)), tilt=tilt)

    @classmethod
    def from_closure(cls, fn, qgrid: TorusGrid, tilt: float = 0.0) -> "ValueFunction":
        return cls(qgrid, np.broadcast_to(fn(qgrid.nodes()), (qgrid.n_nodes,)).copy(), tilt=tilt)

    def lipschitz_constant(self) -> float:
        return float(np.max(np.abs(np.roll(self.values, -1) - self.values)) / self.qgrid.spacing)

    def oscillation(self) -> float:
        return float(np.ptp(self.values))

    def shifted(self, c: float) -> "ValueFunction":
        return ValueFunction(self.qgrid, self.values + c, self.t, self.tilt)

    def evaluate(self, q) -> np.ndarray:
        nodes = self.qgrid.nodes()
        return np.interp(np.mod(np.asarray(q, dtype=float), 1.0), nodes, self.values, period=1.0)


def _shift_indices(n: int, shifts: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower/upper node indices and weights of x_i - shift_j on the circle."""
    pos = np.arange(n)[:, None] - shifts[None, :]
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.int64) % n
    return lo, (lo + 1) % n, frac


def lax_oleinik_step(u: ValueFunction, L: LagrangianTable, tau: float) -> ValueFunction:
    """
    One inf-convolution step of length tau.

    Raises:
        GridMismatch: u and L live on different torus grids
        WindowTooSmall: the minimizer sits on the velocity window boundary
    """
    if tau <= 0:
        raise ValueError(f"step must be positive, got tau={tau}")
    if u.qgrid != L.qgrid:
        raise GridMismatch(f"value function has {u.qgrid.n_nodes} nodes, Lagrangian has {L.qgrid.n_nodes}")
    values, _ = _step_values(u.values, L, tau, u.qgrid.n_nodes)
    return ValueFunction(u.qgrid, values, u.t + tau, L.tilt)


def _step_values(u: np.ndarray, L: LagrangianTable, tau: float, n: int, indices=None):
    if indices is None:
        indices = _shift_indices(n, tau * L.xi_nodes * n)
    lo, hi, frac = indices
    cost = u[:, None] + tau * L.values
    cols = np.arange(L.xi_nodes.size)[None, :]
    cand = (1.0 - frac) * cost[lo, cols] + frac * cost[hi, cols]
    best = np.min(cand, axis=1)
    interior = np.min(cand[:, 1:-1], axis=1)
    edge = np.minimum(cand[:, 0], cand[:, -1])
    scale = max(1.0, float(np.max(np.abs(best))))
    if np.any(edge < interior - BOUNDARY_TOL * scale):
        i = int(np.argmax(interior - edge))
        raise WindowTooSmall(
            f"minimizer on the velocity window |xi| = {L.xi_max:.3g} at q={i / n:.4g}"
        )
    return best, indices


def lax_oleinik(u: ValueFunction, L: LagrangianTable, tau: float, n_steps: int,
                record: Iterable[int] = ()) -> Tuple[ValueFunction, Dict[int, ValueFunction]]:
    """
    n_steps steps from u; also returns the value functions after the steps listed in record.
    """
    if u.qgrid != L.qgrid:
        raise GridMismatch(f"value function has {u.qgrid.n_nodes} nodes, Lagrangian has {L.qgrid.n_nodes}")
    if tau <= 0:
        raise ValueError(f"step must be positive, got tau={tau}")
    record = set(int(s) for s in record)
    n = u.qgrid.n_nodes
    values = u.values
    indices = None
    snapshots: Dict[int, ValueFunction] = {}
    if 0 in record:
        snapshots[0] = u
    for step in range(1, int(n_steps) + 1):
        values, indices = _step_values(values, L, tau, n, indices)
        if step in record:
            snapshots[step] = ValueFunction(u.qgrid, values, u.t + step * tau, L.tilt)
    logger.debug(f"Lax-Oleinik: {n_steps} steps of tau={tau} on {n} nodes")
    return ValueFunction(u.qgrid, values, u.t + n_steps * tau, L.tilt), snapshots
