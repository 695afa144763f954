"""
Discrete Legendre transform between sampled Hamiltonians and Lagrangians.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from domain.field import HamiltonianField, field_from_table
from domain.grids import MomentumGrid, TorusGrid
from shared.constants import CONVEXITY_SLACK, VELOCITY_STEP, VELOCITY_WINDOW_FACTOR
from shared.errors import InvalidField, NotConvex

logger = logging.getLogger(__name__)


def monotone_argmax(slopes: np.ndarray, heights: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    max_j (slopes[j] xi - heights[j]) for every xi, with its argmax.

    Both slopes and xi are increasing and heights is convex in slopes, so the
    argmax is nondecreasing in xi and one forward scan suffices.
    """
    out = np.empty(xi.size)
    arg = np.empty(xi.size, dtype=np.int64)
    j, last = 0, slopes.size - 1
    for m, s in enumerate(xi):
        while j < last and slopes[j + 1] * s - heights[j + 1] >= slopes[j] * s - heights[j]:
            j += 1
        out[m] = slopes[j] * s - heights[j]
        arg[m] = j
    return out, arg


@dataclass(frozen=True, eq=False)
class LagrangianTable:
    """L(q, xi) on qgrid x uniform velocity nodes, in action-rate units."""
    qgrid: TorusGrid
    xi_nodes: np.ndarray
    values: np.ndarray
    tilt: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def xi_max(self) -> float:
        return float(self.xi_nodes[-1])

    @property
    def xi_step(self) -> float:
        return float(self.xi_nodes[1] - self.xi_nodes[0])

    @property
    def min_second_difference(self) -> float:
        second = np.diff(self.values, 2, axis=1)
        return float(np.min(second)) if second.size else 0.0

    @property
    def is_convex(self) -> bool:
        return self.min_second_difference >= CONVEXITY_SLACK * max(1.0, float(np.max(np.abs(self.values))))

    def tilted(self, p: float) -> "LagrangianTable":
        """L(q, xi) - p xi; tilts accumulate."""
        shift = (p - self.tilt) * self.xi_nodes[None, :]
        return LagrangianTable(self.qgrid, self.xi_nodes, self.values - shift, tilt=float(p),
                               metadata=dict(self.metadata))

    def dilated(self, k: int) -> "LagrangianTable":
        """
        The same Lagrangian on a circle of length k, drawn as the unit circle.

        Rows are tiled k times and velocities divided by k, so a step moves a
        point by tau xi in the long circle's units.
        """
        k = int(k)
        if k < 1:
            raise ValueError(f"dilation must be a positive integer, got k={k}")
        if k == 1:
            return self
        meta = dict(self.metadata, dilation=k)
        return LagrangianTable(self.qgrid.refine(k), self.xi_nodes / k, np.tile(self.values, (k, 1)),
                               tilt=self.tilt * k, metadata=meta)

    def evaluate(self, q, xi) -> np.ndarray:
        """Bilinear in (q, xi), periodic in q; xi is clipped to the velocity window."""
        q = np.asarray(q, dtype=float)
        xi = np.clip(np.asarray(xi, dtype=float), self.xi_nodes[0], self.xi_nodes[-1])
        n = self.qgrid.n_nodes
        s = np.mod(q, 1.0) * n
        i0 = np.floor(s).astype(np.int64)
        fq = s - i0
        i0 = i0 % n
        i1 = (i0 + 1) % n
        t = (xi - self.xi_nodes[0]) / self.xi_step
        j0 = np.clip(np.floor(t).astype(np.int64), 0, self.xi_nodes.size - 2)
        fx = t - j0
        v = self.values
        return ((1 - fq) * ((1 - fx) * v[i0, j0] + fx * v[i0, j0 + 1])
                + fq * ((1 - fx) * v[i1, j0] + fx * v[i1, j0 + 1]))

    def describe(self) -> Dict[str, Any]:
        return {
            "n_q": self.qgrid.n_nodes,
            "xi_max": self.xi_max,
            "xi_step": self.xi_step,
            "tilt": self.tilt,
            "convex": self.is_convex,
            **self.metadata,
        }


def legendre(H: HamiltonianField, xi_max: Optional[float] = None,
             xi_step: float = VELOCITY_STEP) -> LagrangianTable:
    """
    L(q, xi) = max over momentum nodes of p xi - H(q, p).

    Args:
        H: autonomous field convex in p
        xi_max: velocity window (default 1.5 sup|dH/dp|)
        xi_step: velocity spacing

    Raises:
        NotConvex: H is not convex in p
        InvalidField: H is time-dependent
    """
    if not H.flags.is_convex_in_p:
        raise NotConvex(f"field '{H.name}' is not convex in p")
    if not H.is_autonomous:
        raise InvalidField(f"Legendre transform needs an autonomous field (field '{H.name}')")
    if xi_max is None:
        xi_max = VELOCITY_WINDOW_FACTOR * H.sup_dp()
    n = max(1, int(np.ceil(xi_max / xi_step - 1e-9)))
    xi = np.arange(-n, n + 1) * xi_step

    pn = H.pgrid.nodes()
    table = np.empty((H.qgrid.n_nodes, xi.size))
    for i, row in enumerate(H.values):
        table[i], _ = monotone_argmax(pn, row, xi)
    logger.debug(f"Legendre transform of '{H.name}': {xi.size} velocities up to {xi[-1]:.3g}")
    return LagrangianTable(H.qgrid, xi, table, metadata={"source": H.name})


def inverse_legendre(L: LagrangianTable, pgrid: MomentumGrid, name: str = "legendre_dual") -> HamiltonianField:
    """H(q, p) = max over velocity nodes of p xi - L(q, xi)."""
    if not L.is_convex:
        raise NotConvex(f"Lagrangian is not convex in xi (min second difference {L.min_second_difference:.3g})")
    table = np.empty((L.qgrid.n_nodes, pgrid.n_nodes))
    for i, row in enumerate(L.values):
        table[i], _ = monotone_argmax(L.xi_nodes, row, pgrid.nodes())
    return field_from_table(table, L.qgrid, pgrid, name=name)


def effective_lagrangian(curve, qgrid: TorusGrid, xi_max: Optional[float] = None,
                         xi_step: float = VELOCITY_STEP) -> LagrangianTable:
    """L-bar(xi) = max over p of p xi - H-bar(p), tiled over qgrid."""
    pn, row = curve.nodes(), np.asarray(curve.values, dtype=float)
    second = np.diff(row, 2)
    # wiggles within the curve's own error are tolerated
    slack = max(-CONVEXITY_SLACK * max(1.0, float(np.max(np.abs(row)))), 4.0 * curve.error_estimate)
    if second.size and float(np.min(second)) < -slack:
        raise NotConvex(f"effective Hamiltonian from {curve.backend} is not convex in p")
    if xi_max is None:
        slopes = np.abs(np.diff(row)) / curve.pgrid.spacing
        xi_max = VELOCITY_WINDOW_FACTOR * max(float(np.max(slopes)), xi_step)
    n = max(1, int(np.ceil(xi_max / xi_step - 1e-9)))
    xi = np.arange(-n, n + 1) * xi_step
    values, _ = monotone_argmax(pn, row, xi)
    return LagrangianTable(qgrid, xi, np.tile(values, (qgrid.n_nodes, 1)), metadata={"source": curve.backend})
