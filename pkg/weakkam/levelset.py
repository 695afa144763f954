"""
Exact effective Hamiltonian of 1-D mechanical fields H = p^2/2 - V(q).

On the energy level lambda the momentum is sqrt(2 (V + lambda)), so
H-bar(p) = lambda with I(lambda) = |p| where I(lambda) = int_0^1 sqrt(2 (V + lambda)) dq,
and H-bar is flat at lambda_0 = -min V on |p| <= I(lambda_0).
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect

from domain.effective import EffectiveHamiltonian
from domain.field import HamiltonianField
from domain.grids import MomentumGrid
from shared.constants import BISECTION_TOL, LEVELSET_ERROR, QUADRATURE_PANELS
from shared.errors import NotMechanical

logger = logging.getLogger(__name__)


class LevelSetOracle:
    """Averaged-momentum formula for one potential V."""

    def __init__(self, V: Callable[[np.ndarray], np.ndarray], panels: int = QUADRATURE_PANELS):
        self.panels = panels
        midpoints = (np.arange(panels) + 0.5) / panels
        self.V = np.asarray(V(midpoints), dtype=float) * np.ones(panels)
        nodes = np.asarray(V(np.arange(panels) / panels), dtype=float)
        self.flat_level = -float(min(np.min(self.V), np.min(nodes)))

    def action(self, lam: float) -> float:
        """I(lambda) by the composite midpoint rule."""
        return float(np.mean(np.sqrt(2.0 * np.maximum(self.V + lam, 0.0))))

    @property
    def flat_radius(self) -> float:
        return self.action(self.flat_level)

    def __call__(self, p: float) -> float:
        target = abs(float(p))
        lam0 = self.flat_level
        if target <= self.flat_radius:
            return lam0
        hi = lam0 + 0.5 * target ** 2 + float(np.ptp(self.V)) + 1.0
        return float(bisect(lambda lam: self.action(lam) - target, lam0, hi, xtol=BISECTION_TOL))


def mechanical_oracle(H: HamiltonianField) -> LevelSetOracle:
    V = H.mechanical_potential()
    if V is None:
        raise NotMechanical(f"field '{H.name}' is not of the form p^2/2 - V(q)")
    return LevelSetOracle(V)


def levelset_oracle(H: HamiltonianField, p: float) -> float:
    """
    H-bar(p) of a mechanical field.

    Raises:
        NotMechanical: H - p^2/2 depends on p
    """
    return mechanical_oracle(H)(p)


def levelset_curve(H: HamiltonianField, pgrid: MomentumGrid,
                   oracle: Optional[LevelSetOracle] = None) -> EffectiveHamiltonian:
    oracle = oracle or mechanical_oracle(H)
    values = np.array([oracle(p) for p in pgrid.nodes()])
    logger.info(f"Level-set curve of '{H.name}': flat piece radius {oracle.flat_radius:.6g}")
    return EffectiveHamiltonian(
        pgrid=pgrid,
        values=values,
        backend="levelset",
        resolutions={"panels": oracle.panels},
        error_estimate=LEVELSET_ERROR,
        metadata={"field": H.name, "flat_level": oracle.flat_level, "flat_radius": oracle.flat_radius},
    )
