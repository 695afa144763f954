"""
The homogenization operator A(H) = H-bar with backend dispatch.

Backends:
    exact_p_only  H = h(p) is its own homogenization
    levelset      closed form for H = p^2/2 - V(q)
    weakkam       long-time Lax-Oleinik averages, H convex in p
    minmax        spectral invariants of the k-fold discrete action
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Union

import numpy as np

from domain.effective import BACKENDS, EffectiveHamiltonian
from domain.field import HamiltonianField
from domain.grids import MomentumGrid
from genfun.action import build_Fk
from genfun.onestep import one_step_gf
from minmax.invariants import gfqi_field, hk_curve, spectral_invariants
from shared.constants import (
    DEFAULT_FIBER_NODES,
    DEFAULT_HORIZON,
    DEFAULT_TAU,
    LIPSCHITZ_SLACK,
    MAX_K,
)
from shared.errors import BackendInvalid, DomainTooSmall, InvalidField
from weakkam.alpha import alpha_curve, alpha_effective
from weakkam.levelset import levelset_curve, levelset_oracle

logger = logging.getLogger(__name__)

AUTO = "auto"


@dataclass
class HomogenizationParams:
    """Backend knobs. Unused fields are ignored by the other backends."""
    k: int = 2
    tau: float = DEFAULT_TAU
    n_fiber: int = DEFAULT_FIBER_NODES
    n_base: Optional[int] = None
    reduce: bool = True
    horizon: float = DEFAULT_HORIZON
    step: float = DEFAULT_TAU
    pgrid: Optional[MomentumGrid] = None
    threads: Optional[int] = None

    @classmethod
    def coerce(cls, params: Union[None, Dict[str, Any], "HomogenizationParams"]) -> "HomogenizationParams":
        if params is None:
            return cls()
        if isinstance(params, cls):
            return params
        known = {f.name for f in fields(cls)}
        for key in params:
            if key not in known:
                raise ValueError(f"Unknown backend parameter: {key}")
        data = dict(params)
        if isinstance(data.get("pgrid"), dict):
            data["pgrid"] = MomentumGrid(**data["pgrid"])
        return cls(**data)

    def replace(self, **changes) -> "HomogenizationParams":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return HomogenizationParams(**data)

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["pgrid"] = self.pgrid.as_dict() if self.pgrid is not None else None
        return data


def select_backend(H: HamiltonianField) -> str:
    """
    Most exact backend whose preconditions H meets.

    Raises:
        BackendInvalid: H is time-dependent; no backend accepts it
    """
    if not H.is_autonomous:
        raise BackendInvalid(AUTO, f"field '{H.name}' is time-dependent",
                             hint="average it over one period with flow.time_average")
    if H.flags.is_p_only:
        return "exact_p_only"
    if H.mechanical_potential() is not None:
        return "levelset"
    if H.flags.is_convex_in_p:
        return "weakkam"
    return "minmax"


def validate_backend(H: HamiltonianField, backend: str, params: Optional[HomogenizationParams] = None) -> None:
    """
    Check the preconditions of one backend.

    Raises:
        BackendInvalid: with the failing reason and a remediation hint
    """
    params = params or HomogenizationParams()
    if backend not in BACKENDS:
        raise BackendInvalid(backend, "unknown backend", hint=f"choose one of {', '.join(BACKENDS)}")
    if not H.is_autonomous:
        raise BackendInvalid(backend, f"field '{H.name}' is time-dependent",
                             hint="average it over one period with flow.time_average")
    if backend == "exact_p_only":
        if not H.flags.is_p_only:
            raise BackendInvalid(backend, f"field '{H.name}' depends on q", hint="use levelset, weakkam or minmax")
    elif backend == "levelset":
        if H.mechanical_potential() is None:
            raise BackendInvalid(backend, f"field '{H.name}' is not of the form p^2/2 - V(q)",
                                 hint="use weakkam for convex fields or minmax otherwise")
    elif backend == "weakkam":
        if not H.flags.is_convex_in_p:
            raise BackendInvalid(backend, f"field '{H.name}' is not convex in p", hint="use minmax")
    elif backend == "minmax":
        if int(params.k) != params.k or not 1 <= params.k <= MAX_K:
            raise BackendInvalid(backend, f"k={params.k} is outside 1..{MAX_K}",
                                 hint="lower k or extrapolate from smaller k")


def _output_grid(H: HamiltonianField, params: HomogenizationParams) -> MomentumGrid:
    return params.pgrid if params.pgrid is not None else H.pgrid


def _exact_curve(H: HamiltonianField, pgrid: MomentumGrid) -> EffectiveHamiltonian:
    row = H.row()
    if pgrid == H.pgrid:
        values, error = row, 0.0
    else:
        values = np.interp(pgrid.nodes(), H.pgrid.nodes(), row)
        error = H.derivative_bounds["dpp"] * H.pgrid.spacing ** 2 / 8.0
    return EffectiveHamiltonian(pgrid=pgrid, values=values, backend="exact_p_only", error_estimate=error,
                                resolutions={"n_p": H.pgrid.n_nodes}, metadata={"field": H.name})


def _minmax_field(H: HamiltonianField) -> HamiltonianField:
    try:
        return gfqi_field(H)
    except (InvalidField, DomainTooSmall, ValueError) as e:
        raise BackendInvalid("minmax", str(e), hint="use a coercive, quadratic or compactly supported field") from e


def _minmax_curve(H: HamiltonianField, pgrid: MomentumGrid, params: HomogenizationParams) -> EffectiveHamiltonian:
    S = one_step_gf(_minmax_field(H), params.tau)
    F = build_Fk(S, int(params.k))
    return hk_curve(F, pgrid, n_fiber=params.n_fiber, n_base=params.n_base, reduce=params.reduce,
                    threads=params.threads)


def _check_continuity(H: HamiltonianField, curve: EffectiveHamiltonian) -> EffectiveHamiltonian:
    pgrid = curve.pgrid
    bound = LIPSCHITZ_SLACK * H.sup_dp((pgrid.p_min, pgrid.p_max))
    allowance = 2.0 * curve.error_estimate / pgrid.spacing
    lipschitz = curve.lipschitz_constant()
    if lipschitz > bound + allowance:
        logger.warning(f"{curve.backend} curve of '{H.name}' has slope {lipschitz:.4g} above {bound:.4g}")
    curve.metadata.update({"lipschitz": lipschitz, "lipschitz_bound": bound})
    return curve


def homogenize(H: HamiltonianField, backend: str = AUTO,
               params: Union[None, Dict[str, Any], HomogenizationParams] = None) -> EffectiveHamiltonian:
    """
    Sample H-bar on a momentum grid.

    Args:
        H: field to homogenize
        backend: one of BACKENDS, or 'auto' for select_backend(H)
        params: HomogenizationParams or a dict of its fields; params.pgrid
            sets the output grid (default H.pgrid)

    Returns:
        EffectiveHamiltonian; a p-only H comes back with its own row

    Raises:
        BackendInvalid: H does not meet the backend's preconditions
    """
    params = HomogenizationParams.coerce(params)
    pgrid = _output_grid(H, params)
    requested = backend
    if backend == AUTO:
        backend = select_backend(H)
    elif H.flags.is_p_only and H.is_autonomous and backend in BACKENDS:
        backend = "exact_p_only"
    validate_backend(H, backend, params)

    logger.info(f"Homogenizing '{H.name}' with {backend} on {pgrid.n_nodes} momenta")
    if backend == "exact_p_only":
        curve = _exact_curve(H, pgrid)
    elif backend == "levelset":
        curve = levelset_curve(H, pgrid)
    elif backend == "weakkam":
        curve = alpha_curve(H, pgrid, T=params.horizon, tau=params.step, threads=params.threads)
    else:
        curve = _minmax_curve(H, pgrid, params)
    curve.metadata["requested_backend"] = requested
    return _check_continuity(H, curve)


def quasi_state(H: HamiltonianField, p: float, backend: str = AUTO,
                params: Union[None, Dict[str, Any], HomogenizationParams] = None) -> float:
    """zeta_p(H) = H-bar(p): the homogenization paired with the Dirac measure at p."""
    params = HomogenizationParams.coerce(params)
    if not H.pgrid.contains(p):
        raise ValueError(f"momentum outside the field grid: p={p}")
    if backend == AUTO or (H.flags.is_p_only and H.is_autonomous and backend in BACKENDS):
        backend = select_backend(H)
    validate_backend(H, backend, params)
    if backend == "exact_p_only":
        return float(np.interp(p, H.pgrid.nodes(), H.row()))
    if backend == "levelset":
        return levelset_oracle(H, p)
    if backend == "weakkam":
        return alpha_effective(H, p, T=params.horizon, tau=params.step)
    F = build_Fk(one_step_gf(_minmax_field(H), params.tau), int(params.k))
    return spectral_invariants(F, p, n_fiber=params.n_fiber, n_base=params.n_base, reduce=params.reduce).c_plus
