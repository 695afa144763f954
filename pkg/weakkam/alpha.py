"""
Mather alpha / effective Hamiltonian from long-time tilted Lax-Oleinik averages.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from domain.effective import EffectiveHamiltonian
from domain.field import HamiltonianField
from domain.grids import MomentumGrid
from shared.constants import (
    DEFAULT_HORIZON,
    DEFAULT_TAU,
    MAX_WINDOW_GROWTHS,
    VELOCITY_STEP,
    VELOCITY_WINDOW_FACTOR,
)
from shared.errors import WindowTooSmall
from shared.utils import parallel_map

from .laxoleinik import ValueFunction, lax_oleinik
from .legendre import LagrangianTable, legendre

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaEstimate:
    """Extrapolated alpha(p) with the raw averages it came from."""
    p: float
    alpha: float
    average_full: float
    average_half: float
    xi_max: float
    interpolation_bias: float = 0.0
    legendre_bias: float = 0.0

    @property
    def error_estimate(self) -> float:
        return abs(self.alpha - self.average_full) + self.interpolation_bias + self.legendre_bias


def step_count(T: float, tau: float, minimum: int = 2) -> int:
    """Number of tau steps spanning T exactly."""
    n = int(round(T / tau))
    if n < minimum or abs(n * tau - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T/tau must be an integer >= {minimum}, got T={T}, tau={tau}")
    return n


def estimate_alpha(H: HamiltonianField, p: float, T: float = DEFAULT_HORIZON, tau: float = DEFAULT_TAU,
                   L: Optional[LagrangianTable] = None) -> AlphaEstimate:
    """
    Tilted Lax-Oleinik from u = 0 up to T, growing the velocity window on demand.

    The estimate is the mean growth of -min u over [T/2, T], i.e. Richardson
    extrapolation in 1/T of the averages at T/2 and T.
    """
    n_steps = step_count(T, tau)
    half = n_steps // 2
    table = L if L is not None else legendre(H)
    for growth in range(MAX_WINDOW_GROWTHS + 1):
        try:
            u0 = ValueFunction.constant(H.qgrid, tilt=p)
            final, snaps = lax_oleinik(u0, table.tilted(p), tau, n_steps, record=[half])
            break
        except WindowTooSmall as e:
            if growth == MAX_WINDOW_GROWTHS:
                raise
            logger.warning(f"p={p:.4g}: {e}; widening velocity window")
            table = legendre(H, xi_max=VELOCITY_WINDOW_FACTOR * table.xi_max, xi_step=table.xi_step)

    t_full, t_half = n_steps * tau, half * tau
    low_full = float(np.min(final.values))
    low_half = float(np.min(snaps[half].values))
    alpha = -(low_full - low_half) / (t_full - t_half)
    # linear interpolation overshoots by at most h^2 u'' / 8 per step; u is semiconcave
    v = final.values
    curvature = float(np.max(np.roll(v, -1) - 2.0 * v + np.roll(v, 1)))
    dp = H.pgrid.spacing
    return AlphaEstimate(
        p=float(p),
        alpha=alpha,
        average_full=-low_full / t_full,
        average_half=-low_half / t_half,
        xi_max=table.xi_max,
        interpolation_bias=max(curvature, 0.0) / (8.0 * tau),
        legendre_bias=H.derivative_bounds["dpp"] * dp * dp / 8.0,
    )


def alpha_effective(H: HamiltonianField, p: float, T: float = DEFAULT_HORIZON, tau: float = DEFAULT_TAU) -> float:
    """
    H-bar(p) as the long-time average of minimal tilted action.

    Raises:
        NotConvex: H is not convex in p
        WindowTooSmall: the velocity window kept growing without containing the minimizers
    """
    return estimate_alpha(H, p, T, tau).alpha


def alpha_curve(H: HamiltonianField, pgrid: MomentumGrid, T: float = DEFAULT_HORIZON, tau: float = DEFAULT_TAU,
                threads: Optional[int] = None) -> EffectiveHamiltonian:
    """alpha_effective at every node of pgrid, sharing one Legendre table."""
    table = legendre(H)
    estimates = parallel_map(lambda p: estimate_alpha(H, float(p), T, tau, L=table), pgrid.nodes(), threads)
    values = np.array([e.alpha for e in estimates])
    logger.info(f"weak KAM curve of '{H.name}' on {pgrid.n_nodes} momenta (T={T}, tau={tau})")
    return EffectiveHamiltonian(
        pgrid=pgrid,
        values=values,
        backend="weakkam",
        tau=tau,
        resolutions={"n_q": H.qgrid.n_nodes, "xi_step": VELOCITY_STEP, "T": T,
                     "xi_max": max(e.xi_max for e in estimates)},
        error_estimate=max(e.error_estimate for e in estimates),
        metadata={"field": H.name},
    )
