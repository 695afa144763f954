"""
Trajectories of Hamiltonian flows with continuous q-lift bookkeeping.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from domain.field import HamiltonianField
from shared.constants import DEFAULT_DT, HALVING_TOL, MAX_HALVINGS
from shared.errors import OutOfDomain
from shared.storage import provenance_header, save_frame

from .integrators import select_scheme

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhasePoint:
    """Point (q, p) with the continuous lift of q; q == lift_q mod 1."""
    q: float
    p: float
    lift_q: float

    @classmethod
    def at(cls, lift_q: float, p: float) -> "PhasePoint":
        return cls(q=float(np.mod(lift_q, 1.0)), p=float(p), lift_q=float(lift_q))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    lift_q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    scheme: str
    dt: float

    @property
    def q(self) -> np.ndarray:
        return np.mod(self.lift_q, 1.0)

    @property
    def final(self) -> PhasePoint:
        return PhasePoint.at(self.lift_q[-1], self.p[-1])

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "q": self.q, "lift_q": self.lift_q, "p": self.p, "H": self.energy})

    def dump(self, path: Union[str, Path], config_hash: str = "") -> Path:
        header = provenance_header(config_hash, kind="trajectory", scheme=self.scheme, dt=self.dt)
        return save_frame(self.to_frame(), path, header)


def resolve_dt(t: float, dt: Optional[float] = None) -> float:
    """Default step t / ceil(t / 1e-3); an explicit dt must divide t."""
    if t < 0:
        raise ValueError(f"integration time must be non-negative, got t={t}")
    if dt is None:
        return t / math.ceil(t / DEFAULT_DT) if t > 0 else DEFAULT_DT
    if dt <= 0:
        raise ValueError(f"time step must be positive, got dt={dt}")
    n = round(t / dt)
    if abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t={t} is not a multiple of dt={dt}")
    return dt


def propagate(H: HamiltonianField, lift_q, p, t: float, dt: float, t0: float = 0.0, record: bool = False):
    """
    Advance arrays of points by time t with step dt.

    Returns (lift_q, p) at time t, or full histories of shape (n_steps + 1, ...)
    when record is set.

    Raises:
        OutOfDomain: a momentum leaves the field's momentum grid
    """
    _, step = select_scheme(H)
    q = np.array(lift_q, dtype=float)
    p = np.array(p, dtype=float)
    n_steps = int(round(t / dt)) if t > 0 else 0
    time = None if H.is_autonomous else t0
    hist_q, hist_p = [q.copy()], [p.copy()]
    for i in range(n_steps):
        q, p = step(H, q, p, time, dt)
        if time is not None:
            time = t0 + (i + 1) * dt
        if not H.pgrid.contains(p, slack=1e-12):
            bad = float(p.flat[np.argmax(np.abs(p))])
            raise OutOfDomain(
                f"momentum p={bad:.6g} left pgrid [{H.pgrid.p_min:g}, {H.pgrid.p_max:g}] at t={t0 + (i + 1) * dt:.6g}"
            )
        if record:
            hist_q.append(q.copy())
            hist_p.append(p.copy())
    if record:
        return np.stack(hist_q), np.stack(hist_p)
    return q, p


def integrate(H: HamiltonianField, z0: PhasePoint, t: float, dt: Optional[float] = None,
              verify_halving: bool = True) -> Trajectory:
    """
    Integrate the flow of H from z0 for time t.

    Args:
        H: autonomous field, or 1-periodic sampled in t
        z0: initial point
        t: final time
        dt: step; defaults to t / ceil(t / 1e-3)
        verify_halving: compare against a half-step run and refine until the
            final states agree within 1e-7

    Returns:
        Trajectory with the continuous q-lift
    """
    dt = resolve_dt(t, dt)
    scheme, _ = select_scheme(H)
    hist_q, hist_p = propagate(H, z0.lift_q, z0.p, t, dt, record=True)

    if verify_halving and t > 0:
        for _ in range(MAX_HALVINGS):
            fq, fp = propagate(H, z0.lift_q, z0.p, t, dt / 2)
            moved = max(abs(float(fq) - float(hist_q[-1])), abs(float(fp) - float(hist_p[-1])))
            if moved < HALVING_TOL:
                break
            logger.debug(f"Halving moved the endpoint by {moved:.3e}; refining dt={dt:g}")
            dt = dt / 2
            hist_q, hist_p = propagate(H, z0.lift_q, z0.p, t, dt, record=True)
        else:
            logger.warning(f"Step halving still moves the endpoint at dt={dt:g}")

    times = np.linspace(0.0, t, len(hist_q))
    if H.is_autonomous:
        energy = H.evaluate(hist_q, hist_p)
    else:
        energy = np.array([float(H.evaluate(qq, pp, tt)) for qq, pp, tt in zip(hist_q, hist_p, times)])
    return Trajectory(times=times, lift_q=hist_q, p=hist_p, energy=np.asarray(energy, dtype=float),
                      scheme=scheme, dt=dt)


def rescale_conjugate(H: HamiltonianField, k: int, z0: PhasePoint, t: float, dt: Optional[float] = None) -> PhasePoint:
    """
    Time-t map of H(kq, p): rho_k^-1 o phi^{kt} o rho_k with rho_k(q, p) = (kq, p).

    The division by k is taken on the continuous lift.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got k={k}")
    total = k * t
    step = resolve_dt(total, None if dt is None else dt)
    end_q, end_p = propagate(H, k * z0.lift_q, z0.p, total, step)
    return PhasePoint.at(float(end_q) / k, float(end_p))
