"""
Sampled Hamiltonians H(q, p) on a TorusGrid x MomentumGrid.

A field keeps the node table, the structural flags inferred from it and, when
available, the analytic closure it was sampled from. Fields are immutable and
safe to share across worker threads.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import RectBivariateSpline

from shared.constants import (
    CONVEXITY_SLACK,
    FD_STEP,
    PERIODICITY_TOL,
    QUADRATIC_FIT_TOL,
    ROW_EQUALITY_TOL,
    SUPPORT_TOL,
)
from shared.errors import GridMismatch, InvalidField, NonPeriodic

from .grids import MomentumGrid, TorusGrid

logger = logging.getLogger(__name__)

Closure = Callable[..., Any]

SEPARABLE_TOL = 1e-10
_SPLINE_PAD = 3


def _call(fn: Closure, *args) -> np.ndarray:
    """Evaluate a closure and broadcast the result to the argument shape."""
    shape = np.broadcast(*[np.asarray(a) for a in args]).shape
    out = np.asarray(fn(*args), dtype=float)
    return np.array(np.broadcast_to(out, shape), dtype=float)


def _bilinear(table: np.ndarray, pgrid: MomentumGrid, q, p) -> np.ndarray:
    q, p = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
    n_q, n_p = table.shape
    s = np.mod(q, 1.0) * n_q
    base = np.floor(s)
    fq = s - base
    i0 = base.astype(int) % n_q
    i1 = (i0 + 1) % n_q
    t = (np.clip(p, pgrid.p_min, pgrid.p_max) - pgrid.p_min) / pgrid.spacing
    j0 = np.clip(np.floor(t).astype(int), 0, n_p - 2)
    fp = t - j0
    return ((1 - fq) * (1 - fp) * table[i0, j0] + fq * (1 - fp) * table[i1, j0]
            + (1 - fq) * fp * table[i0, j0 + 1] + fq * fp * table[i1, j0 + 1])


@dataclass(frozen=True)
class FieldFlags:
    """Structural flags inferred by sampling."""
    is_p_only: bool
    is_convex_in_p: bool
    is_compactly_supported: bool
    is_separable: bool = False

    def as_dict(self) -> Dict[str, bool]:
        return {
            "is_p_only": self.is_p_only,
            "is_convex_in_p": self.is_convex_in_p,
            "is_compactly_supported": self.is_compactly_supported,
            "is_separable": self.is_separable,
        }


@dataclass(frozen=True)
class QuadraticProfile:
    """H(q, p) = a p^2 / 2 + b(q) p + c(q) with constant a != 0."""
    a: float
    b: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], np.ndarray]

    def evaluate(self, q, p) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return 0.5 * self.a * p * p + self.b(q) * p + self.c(q)


def infer_flags(values: np.ndarray) -> Tuple[FieldFlags, Dict[str, float]]:
    """Infer flags from a (n_q, n_p) table or a (n_t, n_q, n_p) stack."""
    stack = values[None] if values.ndim == 2 else values
    scale = max(1.0, float(np.max(np.abs(stack))))

    row_dev = float(np.max(np.abs(stack - stack[:, :1, :])))
    second = np.diff(stack, 2, axis=2)
    min_second = float(np.min(second)) if second.size else 0.0
    edge = float(max(np.max(np.abs(stack[:, :, 0])), np.max(np.abs(stack[:, :, -1]))))
    mixed = stack - stack[:, :, :1] - stack[:, :1, :] + stack[:, :1, :1]
    mixed_dev = float(np.max(np.abs(mixed)))

    flags = FieldFlags(
        is_p_only=row_dev <= ROW_EQUALITY_TOL * scale,
        is_convex_in_p=min_second >= CONVEXITY_SLACK,
        is_compactly_supported=edge <= SUPPORT_TOL * scale,
        is_separable=mixed_dev <= SEPARABLE_TOL * scale,
    )
    thresholds = {
        "row_equality_tol": ROW_EQUALITY_TOL,
        "convexity_slack": CONVEXITY_SLACK,
        "support_tol": SUPPORT_TOL,
        "separable_tol": SEPARABLE_TOL,
        "row_deviation": row_dev,
        "min_second_difference": min_second,
    }
    return flags, thresholds


@dataclass(frozen=True, eq=False)
class HamiltonianField:
    """
    Hamiltonian sampled on qgrid x pgrid.

    values[i, j] = H(q_i, p_j). Time-dependent fields carry time_slices of
    shape (n_t, n_q, n_p) sampled at t = j / n_t; values is then slice 0.
    """
    qgrid: TorusGrid
    pgrid: MomentumGrid
    values: np.ndarray
    flags: FieldFlags
    closure: Optional[Closure] = None
    interpolation: str = "bilinear"
    time_slices: Optional[np.ndarray] = None
    time_closure: Optional[Closure] = None
    name: str = "field"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values.setflags(write=False)
        if self.time_slices is not None:
            self.time_slices.setflags(write=False)

    @property
    def is_autonomous(self) -> bool:
        return self.time_slices is None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.values))))

    @property
    def sup_abs(self) -> float:
        stack = self.values if self.time_slices is None else self.time_slices
        return float(np.max(np.abs(stack)))

    def same_grids(self, other: "HamiltonianField") -> bool:
        return self.qgrid == other.qgrid and self.pgrid == other.pgrid

    def require_same_grids(self, other: "HamiltonianField") -> None:
        if not self.same_grids(other):
            raise GridMismatch(
                f"fields '{self.name}' and '{other.name}' are sampled on different grids: "
                f"{self.qgrid}/{self.pgrid} vs {other.qgrid}/{other.pgrid}"
            )

    # evaluation

    def interpolate(self, q, p) -> np.ndarray:
        """Interpolate the node table (bilinear or bicubic); p is clamped to the grid."""
        if self.interpolation == "bicubic":
            q, p = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
            pc = np.clip(p, self.pgrid.p_min, self.pgrid.p_max)
            out = self._spline.ev(np.mod(q, 1.0).ravel(), pc.ravel())
            return out.reshape(q.shape)
        return _bilinear(self.values, self.pgrid, q, p)

    def evaluate(self, q, p, t: Optional[float] = None) -> np.ndarray:
        """H(t, q, p), from the closure when available, else from the tables."""
        if not self.is_autonomous and t is not None:
            if self.time_closure is not None:
                return _call(self.time_closure, t, q, p)
            return self._interpolate_in_time(q, p, t)
        if self.closure is not None:
            return _call(self.closure, q, p)
        return self.interpolate(q, p)

    def _interpolate_in_time(self, q, p, t: float) -> np.ndarray:
        n_t = self.time_slices.shape[0]
        s = (t % 1.0) * n_t
        j0 = int(np.floor(s)) % n_t
        w = s - np.floor(s)
        a = _bilinear(self.time_slices[j0], self.pgrid, q, p)
        b = _bilinear(self.time_slices[(j0 + 1) % n_t], self.pgrid, q, p)
        return (1 - w) * a + w * b

    def gradient(self, q, p, t: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(dH/dq, dH/dp) by central differences of evaluate, so values and slopes agree."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        h = FD_STEP
        dq = (self.evaluate(q + h, p, t) - self.evaluate(q - h, p, t)) / (2 * h)
        dp = (self.evaluate(q, p + h, t) - self.evaluate(q, p - h, t)) / (2 * h)
        return dq, dp

    @cached_property
    def _spline(self) -> RectBivariateSpline:
        n_q = self.qgrid.n_nodes
        idx = np.arange(-_SPLINE_PAD, n_q + _SPLINE_PAD)
        return RectBivariateSpline(idx / n_q, self.pgrid.nodes(), self.values[idx % n_q], kx=3, ky=3, s=0)

    # structure

    @cached_property
    def derivative_bounds(self) -> Dict[str, float]:
        """Suprema of first and second derivatives estimated on the node table."""
        v = self.values
        hq, hp = self.qgrid.spacing, self.pgrid.spacing
        dq = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * hq)
        dp = np.gradient(v, hp, axis=1)
        dqq = (np.roll(v, -1, axis=0) - 2 * v + np.roll(v, 1, axis=0)) / hq ** 2
        dpp = np.gradient(dp, hp, axis=1)
        dqp = np.gradient(dq, hp, axis=1)
        half_trace = 0.5 * (dqq + dpp)
        radius = np.sqrt((0.5 * (dqq - dpp)) ** 2 + dqp ** 2)
        hessian = np.abs(half_trace) + radius
        return {
            "dq": float(np.max(np.abs(dq))),
            "dp": float(np.max(np.abs(dp))),
            "dqq": float(np.max(np.abs(dqq))),
            "dpp": float(np.max(np.abs(dpp))),
            "dqp": float(np.max(np.abs(dqp))),
            "hessian": float(np.max(hessian)),
        }

    def sup_dp(self, window: Optional[Tuple[float, float]] = None) -> float:
        """sup |dH/dp| over the grid, optionally restricted to p in [lo, hi]."""
        dp = np.gradient(self.values, self.pgrid.spacing, axis=1)
        if window is not None:
            pn = self.pgrid.nodes()
            mask = (pn >= window[0] - 1e-12) & (pn <= window[1] + 1e-12)
            if not np.any(mask):
                return 0.0
            dp = dp[:, mask]
        return float(np.max(np.abs(dp)))

    @cached_property
    def quadratic_profile(self) -> Optional[QuadraticProfile]:
        """Exact quadratic-in-p structure, or None."""
        if not self.is_autonomous:
            return None
        pn = self.pgrid.nodes()
        design = np.stack([0.5 * pn ** 2, pn, np.ones_like(pn)], axis=1)
        coef, *_ = np.linalg.lstsq(design, self.values.T, rcond=None)
        resid = self.values - (design @ coef).T
        tol = QUADRATIC_FIT_TOL * self.scale
        if float(np.max(np.abs(resid))) > tol:
            return None
        a_rows = coef[0]
        if float(np.ptp(a_rows)) > tol or abs(float(np.mean(a_rows))) < tol:
            return None

        if self.closure is not None:
            fn = self.closure
            a = float(_call(fn, 0.0, 1.0) + _call(fn, 0.0, -1.0) - 2.0 * _call(fn, 0.0, 0.0))

            def b(q):
                return (_call(fn, q, 1.0) - _call(fn, q, -1.0)) / 2.0

            def c(q):
                return _call(fn, q, 0.0)
        else:
            a = float(np.mean(a_rows))
            qn = self.qgrid.nodes()
            b_nodes, c_nodes = coef[1].copy(), coef[2].copy()

            def b(q):
                return np.interp(np.mod(q, 1.0), qn, b_nodes, period=1.0)

            def c(q):
                return np.interp(np.mod(q, 1.0), qn, c_nodes, period=1.0)

        return QuadraticProfile(a=a, b=b, c=c)

    def mechanical_potential(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """V with H = p^2/2 - V(q), or None when H is not of that form."""
        prof = self.quadratic_profile
        if prof is None:
            return None
        tol = QUADRATIC_FIT_TOL * self.scale
        qn = self.qgrid.nodes()
        if abs(prof.a - 1.0) > tol or float(np.max(np.abs(prof.b(qn)))) > tol:
            return None
        return lambda q: -prof.c(q)

    def row(self) -> np.ndarray:
        """The common q-row of a p-only field."""
        if not self.flags.is_p_only:
            raise InvalidField(f"field '{self.name}' is not p-only")
        return np.array(self.values[0])

    # derived fields

    def derive(self, values: np.ndarray, closure: Optional[Closure], name: str, **metadata) -> "HamiltonianField":
        if closure is not None:
            return sample_hamiltonian(closure, self.qgrid, self.pgrid, self.interpolation, name=name, metadata=metadata)
        return field_from_table(values, self.qgrid, self.pgrid, interpolation=self.interpolation, name=name,
                                metadata=metadata)

    def _require_autonomous(self, op: str) -> None:
        if not self.is_autonomous:
            raise InvalidField(f"{op} is defined for autonomous fields only (field '{self.name}')")

    def __neg__(self) -> "HamiltonianField":
        self._require_autonomous("negation")
        fn = self.closure
        closure = (lambda q, p: -_call(fn, q, p)) if fn is not None else None
        return self.derive(-self.values, closure, f"-({self.name})")

    def __add__(self, other: "HamiltonianField") -> "HamiltonianField":
        self._require_autonomous("addition")
        self.require_same_grids(other)
        f, g = self.closure, other.closure
        closure = (lambda q, p: _call(f, q, p) + _call(g, q, p)) if f is not None and g is not None else None
        return self.derive(self.values + other.values, closure, f"{self.name}+{other.name}")

    def __sub__(self, other: "HamiltonianField") -> "HamiltonianField":
        return self + (-other)

    def scaled(self, factor: float) -> "HamiltonianField":
        self._require_autonomous("scaling")
        fn = self.closure
        closure = (lambda q, p: factor * _call(fn, q, p)) if fn is not None else None
        return self.derive(factor * self.values, closure, f"{factor:g}*{self.name}")

    def shifted(self, constant: float) -> "HamiltonianField":
        self._require_autonomous("shift")
        fn = self.closure
        closure = (lambda q, p: _call(fn, q, p) + constant) if fn is not None else None
        return self.derive(self.values + constant, closure, f"{self.name}{constant:+g}")

    def compose(self, g: Callable[[np.ndarray], np.ndarray], label: str = "g") -> "HamiltonianField":
        """g o H for a scalar function g."""
        self._require_autonomous("composition")
        fn = self.closure
        closure = (lambda q, p: np.asarray(g(_call(fn, q, p)), dtype=float)) if fn is not None else None
        return self.derive(np.asarray(g(np.array(self.values)), dtype=float), closure, f"{label}({self.name})")

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "qgrid": {"n_nodes": self.qgrid.n_nodes},
            "pgrid": self.pgrid.as_dict(),
            "flags": self.flags.as_dict(),
            "interpolation": self.interpolation,
            "autonomous": self.is_autonomous,
            "metadata": self.metadata,
        }


def field_from_table(values, qgrid: TorusGrid, pgrid: MomentumGrid, closure: Optional[Closure] = None,
                     interpolation: str = "bilinear", time_slices=None, time_closure: Optional[Closure] = None,
                     name: str = "field", metadata: Optional[Dict[str, Any]] = None) -> HamiltonianField:
    """Wrap a node table into a field, validating it and inferring flags."""
    if interpolation not in ("bilinear", "bicubic"):
        raise ValueError(f"Unknown interpolation: {interpolation}")
    values = np.array(values, dtype=float)
    expected = (qgrid.n_nodes, pgrid.n_nodes)
    if values.shape != expected:
        raise InvalidField(f"field '{name}' has shape {values.shape}, grids expect {expected}")
    if not np.all(np.isfinite(values)):
        raise InvalidField(f"field '{name}' has non-finite samples")
    stack = values
    if time_slices is not None:
        time_slices = np.array(time_slices, dtype=float)
        if time_slices.ndim != 3 or time_slices.shape[1:] != expected:
            raise InvalidField(f"field '{name}' time slices have shape {time_slices.shape}")
        if not np.all(np.isfinite(time_slices)):
            raise InvalidField(f"field '{name}' has non-finite time slices")
        stack = time_slices
    flags, thresholds = infer_flags(stack)
    meta = {"thresholds": thresholds}
    meta.update(metadata or {})
    return HamiltonianField(
        qgrid=qgrid, pgrid=pgrid, values=values, flags=flags, closure=closure,
        interpolation=interpolation, time_slices=time_slices, time_closure=time_closure,
        name=name, metadata=meta,
    )


def _check_periodic(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], p_nodes: np.ndarray, name: str) -> None:
    zeros = np.zeros_like(p_nodes)
    at_zero = _call(fn, zeros, p_nodes)
    at_one = _call(fn, zeros + 1.0, p_nodes)
    delta = 1e-6
    extrapolated = 2.0 * _call(fn, zeros + 1.0 - delta, p_nodes) - _call(fn, zeros + 1.0 - 2 * delta, p_nodes)
    if not (np.all(np.isfinite(at_zero)) and np.all(np.isfinite(at_one)) and np.all(np.isfinite(extrapolated))):
        raise InvalidField(f"field '{name}' has non-finite samples at q=0 or q=1")
    tol = PERIODICITY_TOL * max(1.0, float(np.max(np.abs(at_zero))))
    gap = float(max(np.max(np.abs(at_one - at_zero)), np.max(np.abs(extrapolated - at_zero))))
    if gap > tol:
        raise NonPeriodic(f"field '{name}' is not 1-periodic in q: |H(1-,p) - H(0,p)| = {gap:.3e} > {tol:.1e}")


def sample_hamiltonian(expr: Closure, qgrid: TorusGrid, pgrid: MomentumGrid, interpolation: str = "bilinear",
                       time_slices: Optional[int] = None, name: str = "field",
                       metadata: Optional[Dict[str, Any]] = None) -> HamiltonianField:
    """
    Sample an analytic closure on the grids and infer the structural flags.

    Args:
        expr: H(q, p), or H(t, q, p) when time_slices is given
        qgrid: torus grid (q = 1 is excluded by construction)
        pgrid: momentum grid
        interpolation: 'bilinear' (default) or 'bicubic'
        time_slices: number of equispaced t-samples over one period
        name: label carried into artifacts

    Returns:
        HamiltonianField

    Raises:
        NonPeriodic: the closure differs between q=0 and q=1-
        InvalidField: a sample is NaN or infinite
    """
    qn, pn = qgrid.nodes(), pgrid.nodes()
    grid_q, grid_p = np.meshgrid(qn, pn, indexing="ij")

    if time_slices is None:
        _check_periodic(expr, pn, name)
        values = _call(expr, grid_q, grid_p)
        if not np.all(np.isfinite(values)):
            raise InvalidField(f"field '{name}' has non-finite samples")
        return field_from_table(values, qgrid, pgrid, closure=expr, interpolation=interpolation,
                                name=name, metadata=metadata)

    n_t = int(time_slices)
    if n_t < 1:
        raise InvalidField(f"field '{name}' needs at least one time slice, got {n_t}")
    ts = np.arange(n_t) / n_t
    slices = []
    for t in ts:
        _check_periodic(lambda q, p, t=t: expr(t, q, p), pn, name)
        slices.append(_call(expr, t, grid_q, grid_p))
    slices = np.stack(slices)
    t_gap = float(np.max(np.abs(_call(expr, 1.0, grid_q, grid_p) - slices[0])))
    if t_gap > PERIODICITY_TOL * max(1.0, float(np.max(np.abs(slices[0])))):
        raise NonPeriodic(f"field '{name}' is not 1-periodic in t: gap {t_gap:.3e}")
    if not np.all(np.isfinite(slices)):
        raise InvalidField(f"field '{name}' has non-finite samples")
    return field_from_table(slices[0], qgrid, pgrid, interpolation=interpolation, time_slices=slices,
                            time_closure=expr, name=name, metadata=metadata)
