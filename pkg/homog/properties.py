"""
Algebraic laws of the homogenization operator, checked numerically.

Every check compares homogenized curves computed by one backend and passes
when the measured slack stays within the budget
    PROPERTY_BUDGET_FACTOR * (sum of the curves' uncertainties) * tolerance_scale.
A minmax curve's uncertainty includes its c+ - c- gap.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from domain.effective import EffectiveHamiltonian
from domain.field import HamiltonianField, sample_hamiltonian
from domain.grids import MomentumGrid
from domain.presets import bump
from domain.transforms import shear_conjugate
from minmax.invariants import c_pm_iterates
from shared.constants import (
    DEFAULT_SHIFT,
    PROPERTY_ABS_FLOOR,
    PROPERTY_BUDGET_FACTOR,
    PROPERTY_GRID_NODES,
)
from shared.errors import BackendInvalid, EffHamError
from shared.storage import save_json
from shared.utils import config_hash

from .operator import AUTO, HomogenizationParams, homogenize, select_backend, validate_backend

logger = logging.getLogger(__name__)

PROPERTIES = (
    "monotonicity",
    "anti_symmetry",
    "lipschitz",
    "shear_invariance",
    "sandwich",
    "quasi_linearity",
    "constant_shift",
    "projector",
    "c_pm_limit",
)

BACKEND_PREFERENCE = ("exact_p_only", "levelset", "weakkam", "minmax")


@dataclass
class PropertyResult:
    property: str
    inputs: str
    slack: float
    budget: float
    passed: Optional[bool]
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def skipped(self) -> bool:
        return self.passed is None

    def as_dict(self) -> Dict[str, Any]:
        return {
            "property": self.property,
            "inputs": self.inputs,
            "slack": self.slack,
            "budget": self.budget,
            "pass": self.passed,
            "details": self.details,
        }


@dataclass
class PropertyReport:
    results: List[PropertyResult]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.results)

    def failures(self) -> List[PropertyResult]:
        return [r for r in self.results if r.passed is False]

    def get(self, name: str) -> PropertyResult:
        for r in self.results:
            if r.property == name:
                return r
        raise KeyError(name)

    def as_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "results": [r.as_dict() for r in self.results], **self.metadata}

    def save(self, path: Union[str, Path]) -> Path:
        return save_json(self.as_dict(), path)


def uncertainty(curve: EffectiveHamiltonian) -> float:
    """Error estimate widened by the c+/c- gap when the backend reports both."""
    gap = 0.0
    if curve.c_minus is not None and curve.c_plus is not None:
        gap = float(np.max(curve.c_plus - curve.c_minus))
    return curve.error_estimate + gap


def common_backend(fields_: Sequence[HamiltonianField], backend: str,
                   params: HomogenizationParams) -> str:
    """The requested backend, or for 'auto' the most exact one valid for every field."""
    if backend != AUTO:
        return backend
    for name in BACKEND_PREFERENCE:
        try:
            for F in fields_:
                validate_backend(F, name, params)
        except BackendInvalid:
            continue
        return name
    return "minmax"


def default_perturbation(H: HamiltonianField, amplitude: float = 0.3) -> HamiltonianField:
    """amplitude * bump(p), a nonnegative q-independent perturbation."""
    return sample_hamiltonian(lambda q, p: amplitude * bump(p) + 0.0 * q, H.qgrid, H.pgrid,
                              name=f"{amplitude:g}*bump")


def _default_shear() -> Tuple[Callable, Callable]:
    eps = 0.05
    return (lambda q: eps * np.sin(2 * np.pi * np.asarray(q)) / (2 * np.pi),
            lambda q: eps * np.cos(2 * np.pi * np.asarray(q)))


def _default_commuting(s):
    return s ** 3 + s


def evaluation_grid(H: HamiltonianField, params: HomogenizationParams) -> MomentumGrid:
    if params.pgrid is not None:
        return params.pgrid
    return MomentumGrid(0.5 * H.pgrid.p_min, 0.5 * H.pgrid.p_max, PROPERTY_GRID_NODES)


class _Checker:
    """Runs the individual checks for one input set."""

    def __init__(self, H, K, f, df, p0, g, shift, k_max, backend, params, tolerance_scale):
        self.H, self.K, self.f, self.df = H, K, f, df
        self.p0, self.g, self.shift, self.k_max = p0, g, shift, k_max
        self.backend = backend
        self.params = params
        self.scale = tolerance_scale
        self.pgrid = evaluation_grid(H, params)

    def A(self, F: HamiltonianField, backend: str, pgrid: Optional[MomentumGrid] = None) -> EffectiveHamiltonian:
        return homogenize(F, backend, self.params.replace(pgrid=pgrid or self.pgrid))

    def budget(self, curves: Sequence[EffectiveHamiltonian], factor: float = PROPERTY_BUDGET_FACTOR) -> float:
        return max(factor * sum(uncertainty(c) for c in curves) * self.scale, PROPERTY_ABS_FLOOR)

    def monotonicity(self):
        upper = self.H + self.K.compose(lambda s: np.maximum(s, 0.0), label="pos")
        b = common_backend([self.H, upper], self.backend, self.params)
        lo, hi = self.A(self.H, b), self.A(upper, b)
        margin = float(np.min(hi.values - lo.values))
        return [self.H, upper], max(0.0, -margin), self.budget([lo, hi]), {"backend": b, "margin": margin}

    def anti_symmetry(self):
        neg = -self.H
        b = common_backend([self.H, neg], self.backend, self.params)
        a, an = self.A(self.H, b), self.A(neg, b)
        slack = float(np.max(np.abs(an.values + a.values)))
        return [self.H, neg], slack, self.budget([a, an]), {"backend": b}

    def lipschitz(self):
        other = self.H + self.K
        b = common_backend([self.H, other], self.backend, self.params)
        a1, a2 = self.A(self.H, b), self.A(other, b)
        distance = a1.sup_distance(a2)
        c0 = self.K.sup_abs
        return [self.H, other], max(0.0, distance - c0), self.budget([a1, a2]), {
            "backend": b, "distance": distance, "c0_distance": c0}

    def shear_invariance(self):
        sheared = shear_conjugate(self.H, self.f, self.df)
        b = common_backend([self.H, sheared], self.backend, self.params)
        a1, a2 = self.A(self.H, b), self.A(sheared, b)
        return [self.H, sheared], a1.sup_distance(a2), self.budget([a1, a2]), {"backend": b}

    def sandwich(self):
        b = common_backend([self.H], self.backend, self.params)
        step = self.pgrid.spacing
        local = MomentumGrid(self.p0 - step, self.p0 + step, 3)
        curve = self.A(self.H, b, local)
        h = float(curve.values[1])
        qn = self.H.qgrid.nodes()
        on_graph = self.H.evaluate(qn, self.p0 + np.asarray(self.df(qn), dtype=float) * np.ones_like(qn))
        lo, hi = float(np.min(on_graph)), float(np.max(on_graph))
        slack = max(0.0, lo - h, h - hi)
        return [self.H], slack, self.budget([curve]), {"backend": b, "p0": self.p0, "h": h,
                                                        "graph_min": lo, "graph_max": hi}

    def quasi_linearity(self):
        G = self.H.compose(self.g, label="g")
        S = self.H + G
        b = common_backend([self.H, G, S], self.backend, self.params)
        a, ag, asum = self.A(self.H, b), self.A(G, b), self.A(S, b)
        slack_pair = float(np.max(np.abs(asum.values - a.values - ag.values)))

        h = a.as_field(self.H.qgrid, name="hbar")
        hg = h.compose(self.g, label="g")
        exact = [self.A(F, "exact_p_only", a.pgrid) for F in (h, hg, h + hg)]
        slack_p_only = float(np.max(np.abs(exact[2].values - exact[0].values - exact[1].values)))
        return [self.H, G], max(slack_pair, slack_p_only), self.budget([a, ag, asum]), {
            "backend": b, "pair_slack": slack_pair, "p_only_slack": slack_p_only}

    def constant_shift(self):
        shifted = self.H.shifted(self.shift)
        b = common_backend([self.H, shifted], self.backend, self.params)
        a, ac = self.A(self.H, b), self.A(shifted, b)
        slack = float(np.max(np.abs(ac.values - a.values - self.shift)))
        return [self.H, shifted], slack, self.budget([a, ac]), {"backend": b, "shift": self.shift}

    def projector(self):
        b = common_backend([self.H], self.backend, self.params)
        a = self.A(self.H, b)
        again = self.A(a.as_field(self.H.qgrid), AUTO, a.pgrid)
        slack = a.sup_distance(again)
        return [self.H], slack, PROPERTY_ABS_FLOOR, {"backend": b, "second_backend": again.backend}

    def c_pm_limit(self):
        b = common_backend([self.H], AUTO, self.params)
        reference = self.A(self.H, b)
        seq = c_pm_iterates(self.H, self.k_max, tau=self.params.tau, ys=self.pgrid.nodes(),
                            n_fiber=self.params.n_fiber, n_base=self.params.n_base, threads=self.params.threads)
        sup_h = float(np.max(reference.values))
        extrapolation = abs(seq.limit_plus - float(seq.c_plus[-1]))
        error = float(seq.error_estimates[-1]) + extrapolation + uncertainty(reference)
        budget = max(2.0 * error * self.scale, PROPERTY_ABS_FLOOR)
        slack = abs(seq.limit_plus - sup_h)
        return [self.H], slack, budget, {"reference_backend": b, "limit_plus": seq.limit_plus, "sup_h": sup_h,
                                         "k_max": self.k_max}


def check_properties(H: HamiltonianField, K: Optional[HamiltonianField] = None,
                     f: Optional[Callable] = None, p0: float = 0.0, suite: Optional[Sequence[str]] = None,
                     backend: str = AUTO, params: Union[None, Dict[str, Any], HomogenizationParams] = None,
                     tolerance_scale: float = 1.0, df: Optional[Callable] = None,
                     g: Optional[Callable] = None, shift: float = DEFAULT_SHIFT, k_max: int = 2) -> PropertyReport:
    """
    Check the laws of the homogenization operator on H.

    Args:
        H: base field
        K: perturbation for monotonicity (its positive part) and Lipschitz (default 0.3 bump(p))
        f: shear generator, also the graph df of the sandwich (default 0.05 sin(2 pi q) / (2 pi))
        p0: momentum of the sandwich check
        suite: property names (default all of PROPERTIES)
        backend: backend for every comparison, or 'auto' for the most exact common one
        params: backend parameters; params.pgrid is the comparison grid
        tolerance_scale: multiplies every budget
        df: derivative of f (central difference when omitted)
        g: monotone scalar function for the commuting pair (H, g o H) (default h^3 + h)
        shift: constant of the shift check
        k_max: iterate count of the c+- limit check

    Returns:
        PropertyReport; checks whose inputs a backend refuses are reported as skipped,
        any other numerical failure as a failed check
    """
    params = HomogenizationParams.coerce(params)
    suite = list(suite) if suite is not None else list(PROPERTIES)
    for name in suite:
        if name not in PROPERTIES:
            raise ValueError(f"Unknown property: {name}")
    if f is None:
        f, df = _default_shear()
    if df is None:
        h = 1e-6
        df = lambda q: (np.asarray(f(np.asarray(q) + h)) - np.asarray(f(np.asarray(q) - h))) / (2 * h)
    checker = _Checker(H, K if K is not None else default_perturbation(H), f, df, float(p0),
                       g or _default_commuting, shift, k_max, backend, params, tolerance_scale)

    results = []
    for name in suite:
        try:
            inputs, slack, budget, details = getattr(checker, name)()
        except BackendInvalid as e:
            logger.warning(f"{name}: skipped ({e})")
            results.append(PropertyResult(name, config_hash({"property": name, "field": H.describe()}),
                                          float("nan"), float("nan"), None, {"skipped": str(e)}))
            continue
        except EffHamError as e:
            logger.error(f"{name}: FAIL ({type(e).__name__}: {e})")
            results.append(PropertyResult(name, config_hash({"property": name, "field": H.describe()}),
                                          float("nan"), float("nan"), False,
                                          {"error": f"{type(e).__name__}: {e}"}))
            continue
        digest = config_hash({"property": name, "fields": [F.describe() for F in inputs],
                              "params": params.as_dict(), "p0": p0})
        passed = bool(slack <= budget)
        results.append(PropertyResult(name, digest, float(slack), float(budget), passed, details))
        log = logger.info if passed else logger.warning
        log(f"{name}: slack {slack:.3e} vs budget {budget:.3e} -> {'pass' if passed else 'FAIL'}")

    return PropertyReport(results, metadata={
        "field": H.name,
        "backend": backend,
        "default_backend": select_backend(H) if H.is_autonomous else None,
        "tolerance_scale": tolerance_scale,
        "pgrid": checker.pgrid.as_dict(),
    })
