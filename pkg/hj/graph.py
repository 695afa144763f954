"""
Generating functions of phi^t(graph df) over the circle.

With k steps of length tau = t / k, positions x_0..x_k stored as lifted offsets
v_j = x_j - x from the base point x = x_k (so v_k = 0) and momenta p_0..p_{k-1},

    W(x; p, v) = f(x + v_0) + sum_j S(x + v_{j+1}, p_j) + p_j (v_{j+1} - v_j)

with S = -tau H. Critical points are broken characteristics issued from
graph df and u(t, x) = c(unit) of W(x; .). Fiber coordinates are scaled per
axis so the fiber box is the unit cube.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict

import numpy as np

from domain.field import HamiltonianField
from genfun.action import FiberBox
from genfun.slices import EIGEN_TOL, FiberSlice
from shared.constants import FD_STEP, FIBER_BOX_SAFETY, FIBER_BOX_SAMPLES, MIN_BOX_RADIUS

logger = logging.getLogger(__name__)

SLOPE_SAMPLES = 1024


def difference_matrix(k: int) -> np.ndarray:
    """D with (D v)_j = v_{j+1} - v_j, v = (v_0..v_{k-1}), v_k = 0."""
    return -np.eye(k) + np.eye(k, k=1)


@dataclass(frozen=True, eq=False)
class GraphAction:
    """W on the fiber (p_0, v_0, ..., p_{k-1}, v_{k-1})."""
    H: HamiltonianField
    f: Callable[[np.ndarray], np.ndarray]
    tau: float
    k: int
    scales: np.ndarray
    reduction: str = "none"
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.k * self.tau

    @property
    def fiber_dim(self) -> int:
        return 2 * self.k

    def evaluate(self, x, zeta) -> np.ndarray:
        """W at base points x and unscaled fiber points zeta."""
        zeta = np.asarray(zeta, dtype=float)
        x = np.broadcast_to(np.asarray(x, dtype=float), zeta.shape[:-1])
        p, v = zeta[..., 0::2], zeta[..., 1::2]
        vn = np.concatenate([v[..., 1:], np.zeros(v.shape[:-1] + (1,))], axis=-1)
        steps = -self.tau * self.H.evaluate(x[..., None] + vn, p)
        return self.f(x + v[..., 0]) + np.sum(steps + p * (vn - v), axis=-1)

    def _hessian(self) -> np.ndarray:
        d = self.fiber_dim
        A = np.zeros((d, d))
        profile = self.H.quadratic_profile
        for j in range(self.k):
            ip, iv = 2 * j, 2 * j + 1
            A[ip, iv] = A[iv, ip] = -1.0
            if j + 1 < self.k:
                A[ip, iv + 2] = A[iv + 2, ip] = 1.0
            if profile is not None:
                A[ip, ip] = -self.tau * profile.a
        return A

    def value(self, x, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.asarray(self.evaluate(x, xi * self.scales), dtype=float)

    def normalized(self, x, y, xi=None) -> np.ndarray:
        """u is read off W itself at zero tilt, so y is unused."""
        return self.value(x, xi)

    def quadratic_matrix(self) -> np.ndarray:
        """Hessian of the quadratic part of W in scaled fiber coordinates."""
        S = np.diag(self.scales)
        return S @ self._hessian() @ S

    def box(self, y: float = 0.0) -> FiberBox:
        d = self.fiber_dim
        return FiberBox(float(y), np.zeros(d), np.ones(d), 0.0, 1.0)

    def describe(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "tau": self.tau,
            "steps": self.k,
            "fiber_dim": self.fiber_dim,
            "reduction": self.reduction,
            "field": self.H.name,
        }


@dataclass(frozen=True, eq=False)
class ReducedGraphAction(GraphAction):
    """
    W with the momenta eliminated, for H = a p^2/2 + b(q) p + c(q).

    The fiber is (v_0..v_{k-1}); each step contributes the broken-geodesic
    action (d - tau b)^2 / (2 tau a) - tau c with d = v_{j+1} - v_j.
    """
    reduction: str = "quadratic"

    @property
    def fiber_dim(self) -> int:
        return self.k

    @property
    def profile(self):
        return self.H.quadratic_profile

    def _split(self, x, v):
        v = np.asarray(v, dtype=float)
        x = np.broadcast_to(np.asarray(x, dtype=float), v.shape[:-1])
        vn = np.concatenate([v[..., 1:], np.zeros(v.shape[:-1] + (1,))], axis=-1)
        return x, v, vn

    def momenta(self, x, v) -> np.ndarray:
        """Critical momenta p_0..p_{k-1} at unscaled offsets v."""
        x, v, vn = self._split(x, v)
        prof, tau = self.profile, self.tau
        return (vn - v - tau * prof.b(x[..., None] + vn)) / (tau * prof.a)

    def evaluate(self, x, zeta) -> np.ndarray:
        x, v, vn = self._split(x, zeta)
        prof, tau = self.profile, self.tau
        Q = x[..., None] + vn
        w = vn - v - tau * prof.b(Q)
        return self.f(x + v[..., 0]) + np.sum(w ** 2 / (2 * tau * prof.a) - tau * prof.c(Q), axis=-1)

    def _hessian(self) -> np.ndarray:
        D = difference_matrix(self.k)
        return (D.T @ D) / (self.tau * self.profile.a)


def initial_slope(f: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup |f'| by central differences on a fine circle."""
    q = np.arange(SLOPE_SAMPLES) / SLOPE_SAMPLES
    return float(np.max(np.abs(f(q + FD_STEP) - f(q - FD_STEP)))) / (2 * FD_STEP)


def fiber_scales(H: HamiltonianField, f_slope: float, tau: float, k: int, reduced: bool) -> np.ndarray:
    """
    Half-widths holding every critical point: |p_j| <= sup|f'| + j tau sup|H_q|
    and |v_j| <= (k - j) tau sup|H_p| over the reachable momenta.
    """
    hq = H.derivative_bounds["dq"]
    reach = f_slope + k * tau * hq
    qn = H.qgrid.nodes()
    window = np.linspace(-reach, reach, FIBER_BOX_SAMPLES) if reach > 0 else np.zeros(1)
    Q, P = np.meshgrid(qn, window, indexing="ij")
    _, dp = H.gradient(Q, P)
    speed = float(np.max(np.abs(dp)))

    p_radius = np.array([f_slope + j * tau * hq for j in range(k)])
    v_radius = np.array([(k - j) * tau * speed for j in range(k)])
    if reduced:
        radius = v_radius
    else:
        radius = np.empty(2 * k)
        radius[0::2] = p_radius
        radius[1::2] = v_radius
    return np.maximum(FIBER_BOX_SAFETY * radius, MIN_BOX_RADIUS)


def graph_action(H: HamiltonianField, f: Callable[[np.ndarray], np.ndarray], t: float, steps: int) -> GraphAction:
    """
    Smallest generating function available for phi^t(graph df).

    Quadratic-in-p fields lose their momenta; p-only fields collapse to the
    one-step function f(x + v) - p v - t h(p); anything else keeps the full fiber.
    """
    tau = t / steps
    slope = initial_slope(f)
    if H.quadratic_profile is not None:
        action = ReducedGraphAction(H, f, tau, steps, fiber_scales(H, slope, tau, steps, reduced=True))
    elif H.flags.is_p_only:
        action = GraphAction(H, f, t, 1, fiber_scales(H, slope, t, 1, reduced=False), reduction="p_only")
    else:
        action = GraphAction(H, f, tau, steps, fiber_scales(H, slope, tau, steps, reduced=False))
    logger.debug(f"Graph action of '{H.name}' at t={t:.4g}: {action.reduction}, fiber_dim={action.fiber_dim}")
    return action


def graph_slice(action: GraphAction, x: float) -> FiberSlice:
    """Fiber slice of W over the base point x, in principal coordinates."""
    quad = action.quadratic_matrix()
    w, U = np.linalg.eigh(quad)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    w = np.where(np.abs(w) <= EIGEN_TOL * max(scale, 1.0), 0.0, w)
    return FiberSlice(action=action, y=0.0, box=action.box(), axes=U, eigenvalues=w, x_fixed=float(x))
