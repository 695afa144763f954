"""
k-fold discrete actions and their exact fiber reductions.

For a one-step generating function S and k >= 1 the action is

    F_k(x, y; xi) = (1/r) sum_j S(r q_j, p_j) + sum_{j<k} p_j (v_j - v_{j+1}) + y v_k

with q_j = x + v_j lifted positions, v_1 = 0, p_k = y and the fiber
xi = (p_1, v_2, p_2, v_3, ..., p_{k-1}, v_k). r = k applies the rescaling
conjugation (q, p) -> (kq, p); r = 1 is the plain k-fold composition.
Spectral values are read off the normalized action G = -F / T, where T is the
time the composition spans in the units of the target map.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from shared.constants import FD_STEP, FIBER_BOX_SAFETY, FIBER_BOX_SAMPLES

from .onestep import OneStepGF

logger = logging.getLogger(__name__)


def p_index(j: int) -> int:
    """Position of p_j (1 <= j < k) in the fiber vector."""
    return 2 * (j - 1)


def v_index(j: int) -> int:
    """Position of v_j (2 <= j <= k) in the fiber vector."""
    return 2 * (j - 2) + 1


def coupling_matrix(k: int) -> np.ndarray:
    """M with sum_{j<k} p_j (v_j - v_{j+1}) = p^T M v, p = (p_1..p_{k-1}), v = (v_2..v_k)."""
    n = k - 1
    return -np.eye(n) + np.eye(n, k=-1)


def coupling_sigma_min(k: int) -> float:
    """Smallest singular value of the coupling matrix, from the tridiagonal M^T M."""
    n = k - 1
    if n <= 0:
        return 1.0
    if n == 1:
        return 1.0
    diag = np.full(n, 2.0)
    diag[-1] = 1.0
    off = -np.ones(n - 1)
    lam = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(np.sqrt(max(lam[0], 0.0)))


def _broadcast(x, y, xi, dim: int):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if xi is None:
        xi = np.zeros(np.broadcast_shapes(x.shape, y.shape) + (dim,))
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != dim:
        raise ValueError(f"fiber vector has {xi.shape[-1]} components, expected {dim}")
    shape = np.broadcast_shapes(x.shape, y.shape, xi.shape[:-1])
    return (np.broadcast_to(x, shape), np.broadcast_to(y, shape),
            np.broadcast_to(xi, shape + (dim,)), shape)


@dataclass(frozen=True)
class FiberBox:
    """Axis-aligned box in fiber coordinates holding every fiber-critical point at y."""
    y: float
    center: np.ndarray
    radius: np.ndarray
    gfqi_radius: float
    sigma_min: float

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.radius))

    def contains(self, xi, slack: float = 1e-12) -> bool:
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(np.abs(xi - self.center) <= self.radius + slack))

    def scaled(self, factor: float) -> "FiberBox":
        return FiberBox(self.y, self.center, self.radius * factor, self.gfqi_radius, self.sigma_min)

    def restrict(self, indices) -> "FiberBox":
        idx = np.asarray(indices, dtype=int)
        return FiberBox(self.y, self.center[idx], self.radius[idx], self.gfqi_radius, self.sigma_min)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "y": self.y,
            "center": self.center.tolist(),
            "radius": self.radius.tolist(),
            "gfqi_radius": self.gfqi_radius,
            "sigma_min": self.sigma_min,
        }


@dataclass(frozen=True, eq=False)
class DiscreteAction:
    """The k-fold action F_k built from a one-step generating function."""
    S: OneStepGF
    k: int
    rescaled: bool = True
    metadata: Dict[str, Any] = field(default_factory=dict)

    reduction = "none"

    @property
    def r(self) -> int:
        return self.k if self.rescaled else 1

    @property
    def tau(self) -> float:
        return self.S.tau

    @property
    def total_time(self) -> float:
        return self.tau if self.rescaled else self.k * self.tau

    @property
    def fiber_dim(self) -> int:
        return 2 * (self.k - 1)

    @property
    def H(self):
        return self.S.H

    def _chain(self, x, y, xi):
        """Lifted offsets v_1..v_k and momenta p_1..p_k."""
        x, y, xi, shape = _broadcast(x, y, xi, self.fiber_dim)
        v = np.concatenate([np.zeros(shape + (1,)), xi[..., 1::2]], axis=-1)
        p = np.concatenate([xi[..., 0::2], y[..., None]], axis=-1)
        return x, y, p, v

    def quadratic_part(self, x, y, xi=None) -> np.ndarray:
        x, y, p, v = self._chain(x, y, xi)
        return np.sum(p[..., :-1] * (v[..., :-1] - v[..., 1:]), axis=-1) + y * v[..., -1]

    def value(self, x, y, xi=None) -> np.ndarray:
        x, y, p, v = self._chain(x, y, xi)
        r = self.r
        steps = np.sum(self.S.S(r * (x[..., None] + v), p), axis=-1) / r
        coupling = np.sum(p[..., :-1] * (v[..., :-1] - v[..., 1:]), axis=-1) + y * v[..., -1]
        return steps + coupling

    def gradient(self, x, y, xi=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, y, p, v = self._chain(x, y, xi)
        r = self.r
        sq, sp = self.S.dS(r * (x[..., None] + v), p)
        dx = np.sum(sq, axis=-1)
        dy = sp[..., -1] / r + v[..., -1]
        dxi = np.empty(x.shape + (self.fiber_dim,))
        dxi[..., 0::2] = sp[..., :-1] / r + v[..., :-1] - v[..., 1:]
        dxi[..., 1::2] = sq[..., 1:] + p[..., 1:] - p[..., :-1]
        return dx, dy, dxi

    def normalized(self, x, y, xi=None) -> np.ndarray:
        return -self.value(x, y, xi) / self.total_time

    def quadratic_matrix(self) -> np.ndarray:
        """Hessian in xi of the quadratic part of F (momentum curvature included when H is quadratic in p)."""
        d = self.fiber_dim
        A = np.zeros((d, d))
        profile = self.H.quadratic_profile
        for j in range(1, self.k):
            ip = p_index(j)
            if j >= 2:
                A[ip, v_index(j)] = A[v_index(j), ip] = 1.0
            A[ip, v_index(j + 1)] = A[v_index(j + 1), ip] = -1.0
            if profile is not None:
                A[ip, ip] = -self.tau * profile.a / self.r
        return A

    def box(self, y: float) -> FiberBox:
        return fiber_box(self, y)

    def describe(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "tau": self.tau,
            "rescaled": self.rescaled,
            "fiber_dim": self.fiber_dim,
            "total_time": self.total_time,
            "reduction": self.reduction,
            "field": self.H.name,
        }


def build_Fk(S: OneStepGF, k: int, rescaled: bool = True) -> DiscreteAction:
    """k-fold action of S; rescaled=False gives the unconjugated composition."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got k={k}")
    meta = dict(S.metadata)
    meta["gfqi_bound"] = k * S.tau * S.H.sup_abs
    return DiscreteAction(S=S, k=int(k), rescaled=rescaled, metadata=meta)


def fiber_box(F: DiscreteAction, y: float = 0.0) -> FiberBox:
    """
    Box around the critical points of F(x, y; .) for every x.

    Stationarity in v_j gives p_{j-1} = p_j - tau dH/dq, so |p_j - y| <= (k - j) tau sup|H_q|;
    stationarity in p_j gives v_{j+1} - v_j = -(tau / r) dH/dp, centered on the mean
    slope at y. Radii carry a small safety factor on the sampled suprema.
    """
    k, r, tau = F.k, F.r, F.tau
    d = F.fiber_dim
    sigma = coupling_sigma_min(k)
    if d == 0:
        return FiberBox(float(y), np.zeros(0), np.zeros(0), 0.0, sigma)

    H = F.H
    bounds = H.derivative_bounds
    hq = bounds["dq"]
    qn = H.qgrid.nodes()
    _, slope = H.gradient(qn, np.full_like(qn, y))
    m = float(np.mean(slope))

    P = (k - 1) * tau * hq
    window = np.linspace(y - P, y + P, FIBER_BOX_SAMPLES) if P > 0 else np.array([float(y)])
    Q, W = np.meshgrid(qn, window, indexing="ij")
    _, dp = H.gradient(Q, W)
    spread = float(np.max(np.abs(dp - m)))

    center = np.zeros(d)
    radius = np.zeros(d)
    for j in range(1, k):
        center[p_index(j)] = y
        radius[p_index(j)] = (k - j) * tau * hq
    for j in range(2, k + 1):
        center[v_index(j)] = -(j - 1) * (tau / r) * m
        radius[v_index(j)] = (j - 1) * (tau / r) * spread
    radius *= FIBER_BOX_SAFETY

    C = np.sqrt(2 * (k - 1)) * tau * max(bounds["dp"] / r, hq)
    gfqi = 2.0 * C / sigma
    logger.debug(f"Fiber box k={k} y={y:.4g}: |radius|={np.linalg.norm(radius):.3g}, gfqi={gfqi:.3g}")
    return FiberBox(float(y), center, radius, float(gfqi), sigma)


@dataclass(frozen=True, eq=False)
class ReducedAction:
    """
    F_k with p_1..p_{k-1} eliminated at their critical point, for H = a p^2/2 + b(q) p + c(q).

    The fiber is v = (v_2..v_k). Critical values and min-max values agree with F_k.
    """
    source: DiscreteAction

    reduction = "quadratic"

    @property
    def k(self) -> int:
        return self.source.k

    @property
    def r(self) -> int:
        return self.source.r

    @property
    def tau(self) -> float:
        return self.source.tau

    @property
    def total_time(self) -> float:
        return self.source.total_time

    @property
    def fiber_dim(self) -> int:
        return self.k - 1

    @property
    def H(self):
        return self.source.H

    @property
    def profile(self):
        return self.H.quadratic_profile

    @property
    def metadata(self) -> Dict[str, Any]:
        return self.source.metadata

    def _split(self, x, y, v):
        x, y, v, shape = _broadcast(x, y, v, self.fiber_dim)
        v = np.concatenate([np.zeros(shape + (1,)), v], axis=-1)
        return x, y, v

    def momenta(self, x, y, v) -> np.ndarray:
        """Critical momenta p_1..p_{k-1}."""
        x, y, v = self._split(x, y, v)
        prof, r, tau = self.profile, self.r, self.tau
        Q = r * (x[..., None] + v)
        u = v[..., :-1] - v[..., 1:]
        return ((r / tau) * u - prof.b(Q[..., :-1])) / prof.a

    def lift(self, x, y, v) -> np.ndarray:
        """Full fiber vector of F_k at the critical momenta."""
        p = self.momenta(x, y, v)
        v = np.asarray(v, dtype=float)
        xi = np.empty(p.shape[:-1] + (2 * self.fiber_dim,))
        xi[..., 0::2] = p
        xi[..., 1::2] = np.broadcast_to(v, p.shape)
        return xi

    def value(self, x, y, v=None) -> np.ndarray:
        x, y, v = self._split(x, y, v)
        prof, r, tau = self.profile, self.r, self.tau
        Q = r * (x[..., None] + v)
        u = v[..., :-1] - v[..., 1:]
        w = u - (tau / r) * prof.b(Q[..., :-1])
        inner = np.sum(r / (2 * tau * prof.a) * w ** 2 - (tau / r) * prof.c(Q[..., :-1]), axis=-1)
        Qk = Q[..., -1]
        last = -(tau / r) * (0.5 * prof.a * y ** 2 + prof.b(Qk) * y + prof.c(Qk)) + y * v[..., -1]
        return inner + last

    def gradient(self, x, y, v=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, y, v = self._split(x, y, v)
        prof, r, tau = self.profile, self.r, self.tau
        h = FD_STEP
        Q = r * (x[..., None] + v)
        db = (prof.b(Q + h) - prof.b(Q - h)) / (2 * h)
        dc = (prof.c(Q + h) - prof.c(Q - h)) / (2 * h)
        u = v[..., :-1] - v[..., 1:]
        lam = (r / (tau * prof.a)) * (u - (tau / r) * prof.b(Q[..., :-1]))
        lam = np.concatenate([lam, y[..., None]], axis=-1)
        g = -tau * (lam * db + dc)
        dx = np.sum(g, axis=-1)
        dy = -(tau / r) * (prof.a * y + prof.b(Q[..., -1])) + v[..., -1]
        dv = g[..., 1:] + lam[..., 1:] - lam[..., :-1]
        return dx, dy, dv

    def normalized(self, x, y, v=None) -> np.ndarray:
        return -self.value(x, y, v) / self.total_time

    def quadratic_matrix(self) -> np.ndarray:
        M = coupling_matrix(self.k)
        return (self.r / (self.tau * self.profile.a)) * (M.T @ M)

    def box(self, y: float) -> FiberBox:
        full = fiber_box(self.source, y)
        return full.restrict([v_index(j) for j in range(2, self.k + 1)])

    def describe(self) -> Dict[str, Any]:
        info = self.source.describe()
        info.update({"reduction": self.reduction, "fiber_dim": self.fiber_dim})
        return info


@dataclass(frozen=True, eq=False)
class POnlyAction:
    """For H = h(p) the action is stably equivalent to the constant (k / r) S(y); G = h(y)."""
    source: DiscreteAction

    reduction = "p_only"
    fiber_dim = 0

    @property
    def k(self) -> int:
        return self.source.k

    @property
    def tau(self) -> float:
        return self.source.tau

    @property
    def total_time(self) -> float:
        return self.source.total_time

    @property
    def H(self):
        return self.source.H

    @property
    def metadata(self) -> Dict[str, Any]:
        return self.source.metadata

    def value(self, x, y, xi=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        S = self.source.S
        out = (self.k / self.source.r) * S.S(np.zeros_like(y), y)
        return np.broadcast_to(out, np.broadcast_shapes(x.shape, y.shape)).copy()

    def normalized(self, x, y, xi=None) -> np.ndarray:
        return -self.value(x, y, xi) / self.total_time

    def quadratic_matrix(self) -> np.ndarray:
        return np.zeros((0, 0))

    def box(self, y: float) -> FiberBox:
        return FiberBox(float(y), np.zeros(0), np.zeros(0), 0.0, 1.0)

    def describe(self) -> Dict[str, Any]:
        info = self.source.describe()
        info.update({"reduction": self.reduction, "fiber_dim": 0})
        return info


def reduce_momenta(F: DiscreteAction) -> Optional[ReducedAction]:
    """Momentum-eliminated action, or None when H is not quadratic in p."""
    if F.H.quadratic_profile is None:
        return None
    return ReducedAction(source=F)


def reduce_action(F: DiscreteAction, allow_reduction: bool = True):
    """Smallest stably equivalent action available for F."""
    if not allow_reduction:
        return F
    if F.H.flags.is_p_only:
        return POnlyAction(source=F)
    if F.k == 1:
        return F
    reduced = reduce_momenta(F)
    if reduced is not None:
        logger.debug(f"Eliminated {F.k - 1} momenta from F_{F.k} (a={F.H.quadratic_profile.a:.4g})")
        return reduced
    return F
