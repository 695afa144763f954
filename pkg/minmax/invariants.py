"""
Spectral invariants of discrete actions and the curves built from them.

Values are reported on the normalized action G = -F / T, so a p-only field h
gives c(unit) = c(fundamental) = h(y) at every y.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from domain.effective import EffectiveHamiltonian
from domain.field import HamiltonianField
from domain.grids import MomentumGrid
from domain.transforms import truncate_coercive
from genfun.action import build_Fk, reduce_action
from genfun.onestep import one_step_gf
from genfun.slices import action_slice
from shared.constants import DEFAULT_FIBER_NODES, DEFAULT_TAU, MAX_K
from shared.errors import ResolutionBudget
from shared.storage import provenance_header, save_frame
from shared.utils import parallel_map

from .complex import FUNDAMENTAL, UNIT, build_complex
from .persistence import c_value

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralInvariants:
    """c(unit), c(fundamental) and their gap at one momentum (or over a momentum grid)."""
    c_minus: float
    c_plus: float
    error_estimate: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return self.c_plus - self.c_minus

    def as_dict(self) -> Dict[str, Any]:
        return {
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "gamma": self.gamma,
            "error_estimate": self.error_estimate,
            **self.metadata,
        }


def gfqi_field(H: HamiltonianField) -> HamiltonianField:
    """
    Field whose actions are quadratic at infinity.

    p-only, quadratic-in-p and compactly supported fields pass through; any
    other field is truncated at half the momentum range.
    """
    if H.flags.is_p_only or H.flags.is_compactly_supported or H.quadratic_profile is not None:
        return H
    A = 0.5 * min(-H.pgrid.p_min, H.pgrid.p_max)
    logger.info(f"Truncating '{H.name}' at A={A:g} for the min-max backend")
    return truncate_coercive(H, A)


def _step_error(action) -> float:
    bounds = action.H.derivative_bounds
    return 0.5 * action.tau * bounds["dq"] * bounds["dp"]


def spectral_invariants(F, y: float, n_fiber: int = DEFAULT_FIBER_NODES, n_base: Optional[int] = None,
                        reduce: bool = True) -> SpectralInvariants:
    """
    c(unit) and c(fundamental) of the slice of F at momentum y.

    Args:
        F: DiscreteAction (reduced to the smallest equivalent action unless reduce=False)
        y: momentum of the slice
        n_fiber: odd number of nodes per fiber axis
        n_base: nodes on the base circle (default 16 r)
        reduce: allow momentum elimination

    Raises:
        ResolutionBudget: the sampled complex is too large
        ClassNotFound: the fiber box never separated from the negative end
    """
    action = reduce_action(F, allow_reduction=reduce)
    slc = action_slice(action, y)
    cx = build_complex(slc, n_base=n_base, n_fiber=n_fiber)
    c_minus = c_value(cx, UNIT)
    c_plus = c_value(cx, FUNDAMENTAL)
    error = float(cx.metadata.get("oscillation", 0.0)) + _step_error(action)
    logger.debug(f"y={y:.4g}: c-={c_minus:.6g} c+={c_plus:.6g} ({action.reduction}, shape {cx.values.shape})")
    return SpectralInvariants(
        c_minus=c_minus,
        c_plus=c_plus,
        error_estimate=error,
        metadata={
            "y": float(y),
            "k": F.k,
            "reduction": action.reduction,
            "shape": list(cx.values.shape),
            "negative_axes": list(cx.negative_axes),
            "growths": cx.metadata.get("growths"),
        },
    )


def _momenta(ys: Union[MomentumGrid, Sequence[float]]) -> np.ndarray:
    if isinstance(ys, MomentumGrid):
        return ys.nodes()
    return np.asarray(ys, dtype=float)


def slice_sweep(F, ys, n_fiber: int = DEFAULT_FIBER_NODES, n_base: Optional[int] = None,
                reduce: bool = True, threads: Optional[int] = None) -> List[SpectralInvariants]:
    """spectral_invariants at every momentum, in order."""
    ys = _momenta(ys)
    return parallel_map(lambda y: spectral_invariants(F, float(y), n_fiber, n_base, reduce), ys, threads)


def map_invariants(F, ys, n_fiber: int = DEFAULT_FIBER_NODES, n_base: Optional[int] = None,
                   reduce: bool = True, threads: Optional[int] = None) -> SpectralInvariants:
    """Map-level c- = min over y of c(unit) and c+ = max over y of c(fundamental)."""
    ys = _momenta(ys)
    sweep = slice_sweep(F, ys, n_fiber, n_base, reduce, threads)
    lows = np.array([s.c_minus for s in sweep])
    highs = np.array([s.c_plus for s in sweep])
    i, j = int(np.argmin(lows)), int(np.argmax(highs))
    return SpectralInvariants(
        c_minus=float(lows[i]),
        c_plus=float(highs[j]),
        error_estimate=max(s.error_estimate for s in sweep),
        metadata={"k": F.k, "y_minus": float(ys[i]), "y_plus": float(ys[j]), "n_slices": int(ys.size)},
    )


def hk_curve(F, pgrid: MomentumGrid, n_fiber: int = DEFAULT_FIBER_NODES, n_base: Optional[int] = None,
             reduce: bool = True, threads: Optional[int] = None) -> EffectiveHamiltonian:
    """h_k(y) = c(fundamental) of the y-slice, at every node of pgrid."""
    sweep = slice_sweep(F, pgrid, n_fiber, n_base, reduce, threads)
    c_minus = np.array([s.c_minus for s in sweep])
    c_plus = np.array([s.c_plus for s in sweep])
    reduction = sweep[0].metadata["reduction"]
    logger.info(f"h_{F.k} on {pgrid.n_nodes} momenta: range [{c_plus.min():.4g}, {c_plus.max():.4g}]")
    return EffectiveHamiltonian(
        pgrid=pgrid,
        values=c_plus,
        backend="minmax",
        k=F.k,
        tau=F.tau,
        resolutions={"n_q": F.H.qgrid.n_nodes, "n_fiber": n_fiber, "n_base": sweep[0].metadata["shape"][0]},
        error_estimate=max(s.error_estimate for s in sweep),
        c_minus=c_minus,
        c_plus=c_plus,
        metadata={"normalization": -1.0 / F.total_time, "reduction": reduction, "field": F.H.name},
    )


@dataclass(frozen=True, eq=False)
class SpectralSequence:
    """(1/k) c-(phi^k) and (1/k) c+(phi^k) for k = 1..k_max with extrapolated limits."""
    ks: np.ndarray
    c_minus: np.ndarray
    c_plus: np.ndarray
    error_estimates: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @staticmethod
    def _extrapolate(ks: np.ndarray, values: np.ndarray) -> float:
        # first-order Richardson in 1/k
        if values.size < 2:
            return float(values[-1])
        k = ks[-1]
        return float(k * values[-1] - (k - 1) * values[-2])

    @property
    def limit_plus(self) -> float:
        return self._extrapolate(self.ks, self.c_plus)

    @property
    def limit_minus(self) -> float:
        return self._extrapolate(self.ks, self.c_minus)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": self.ks,
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "error_estimate": self.error_estimates,
        })

    def save(self, path: Union[str, Path], config_hash: str = "") -> Path:
        header = provenance_header(config_hash, kind="c_pm_iterates", limit_plus=self.limit_plus,
                                   limit_minus=self.limit_minus, **self.metadata)
        return save_frame(self.to_frame(), path, header)


def c_pm_iterates(H: HamiltonianField, k_max: int, tau: float = DEFAULT_TAU, ys=None,
                  n_fiber: int = DEFAULT_FIBER_NODES, n_base: Optional[int] = None,
                  threads: Optional[int] = None) -> SpectralSequence:
    """
    Normalized map invariants of phi^k, k = 1..k_max, from the unconjugated composition.

    Raises:
        ResolutionBudget: k_max exceeds MAX_K
    """
    if int(k_max) != k_max or k_max < 1:
        raise ValueError(f"k_max must be a positive integer, got k_max={k_max}")
    if k_max > MAX_K:
        raise ResolutionBudget(f"k_max={k_max} exceeds the feasible envelope MAX_K={MAX_K}")
    G = gfqi_field(H)
    S = one_step_gf(G, tau)
    ys = G.pgrid if ys is None else ys
    ks, lows, highs, errors = [], [], [], []
    for k in range(1, int(k_max) + 1):
        inv = map_invariants(build_Fk(S, k, rescaled=False), ys, n_fiber, n_base, threads=threads)
        logger.info(f"k={k}: c-/k={inv.c_minus:.6g} c+/k={inv.c_plus:.6g}")
        ks.append(k)
        lows.append(inv.c_minus)
        highs.append(inv.c_plus)
        errors.append(inv.error_estimate)
    return SpectralSequence(
        ks=np.array(ks),
        c_minus=np.array(lows),
        c_plus=np.array(highs),
        error_estimates=np.array(errors),
        metadata={"tau": tau, "field": G.name, "truncated_at": G.metadata.get("truncated_at")},
    )
