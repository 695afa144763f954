"""
Symplectic one-step schemes for q' = dH/dp, p' = -dH/dq.

Both base schemes are symmetric, so the triple-jump composition lifts them to
fourth order. All steps act on arrays of points at once; q is the continuous
lift, never reduced modulo 1.
"""

from typing import Callable, Optional, Tuple

import numpy as np

from domain.field import HamiltonianField
from shared.constants import NEWTON_MAX_ITER, NEWTON_TOL
from shared.errors import NewtonDivergence

Step = Callable[[HamiltonianField, np.ndarray, np.ndarray, Optional[float], float], Tuple[np.ndarray, np.ndarray]]

_HESSIAN_STEP = 1e-4


def triple_jump_weights(order: int = 2) -> Tuple[float, float, float]:
    """Weights (z1, z0, z1) raising a symmetric scheme of the given order by two."""
    m = order // 2
    root = 2 ** (1 / (2 * m + 1))
    z1 = 1 / (2 - root)
    z0 = -root / (2 - root)
    return z1, z0, z1


YOSHIDA_WEIGHTS = triple_jump_weights(2)


def stormer_verlet_step(H: HamiltonianField, q: np.ndarray, p: np.ndarray, t: Optional[float],
                        dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Kick-drift-kick for separable H = T(p) + V(q)."""
    dq, _ = H.gradient(q, p, t)
    p_half = p - 0.5 * dt * dq
    _, dp = H.gradient(q, p_half, t)
    q_new = q + dt * dp
    dq, _ = H.gradient(q_new, p_half, t)
    return q_new, p_half - 0.5 * dt * dq


def _second_derivatives(H: HamiltonianField, q, p, t):
    h = _HESSIAN_STEP
    dq_plus, dp_plus = H.gradient(q + h, p, t)
    dq_minus, dp_minus = H.gradient(q - h, p, t)
    _, dp_up = H.gradient(q, p + h, t)
    _, dp_down = H.gradient(q, p - h, t)
    hqq = (dq_plus - dq_minus) / (2 * h)
    hqp = (dp_plus - dp_minus) / (2 * h)
    hpp = (dp_up - dp_down) / (2 * h)
    return hqq, hqp, hpp


def implicit_midpoint_step(H: HamiltonianField, q: np.ndarray, p: np.ndarray, t: Optional[float],
                           dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Implicit midpoint rule solved by Newton's method, pointwise 2x2 systems.

    Raises:
        NewtonDivergence: residual above tolerance after NEWTON_MAX_ITER iterations
    """
    t_mid = None if t is None else t + 0.5 * dt
    dq0, dp0 = H.gradient(q, p, t)
    q_new = q + dt * dp0
    p_new = p - dt * dq0
    scale = max(1.0, float(np.max(np.abs(q))), float(np.max(np.abs(p))))
    res_norm = np.inf
    for _ in range(NEWTON_MAX_ITER):
        qm, pm = 0.5 * (q + q_new), 0.5 * (p + p_new)
        dq, dp = H.gradient(qm, pm, t_mid)
        r1 = q_new - q - dt * dp
        r2 = p_new - p + dt * dq
        res_norm = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
        if res_norm <= NEWTON_TOL * scale:
            return q_new, p_new
        hqq, hqp, hpp = _second_derivatives(H, qm, pm, t_mid)
        a = 1 - 0.5 * dt * hqp
        b = -0.5 * dt * hpp
        c = 0.5 * dt * hqq
        d = 1 + 0.5 * dt * hqp
        det = a * d - b * c
        q_new = q_new - (d * r1 - b * r2) / det
        p_new = p_new - (-c * r1 + a * r2) / det
    raise NewtonDivergence(f"implicit midpoint did not converge: residual={res_norm:.3e} after {NEWTON_MAX_ITER} iterations")


def composed_step(base: Step) -> Step:
    """Fourth-order triple-jump composition of a symmetric base step."""

    def step(H, q, p, t, dt):
        for w in YOSHIDA_WEIGHTS:
            q, p = base(H, q, p, t, w * dt)
            if t is not None:
                t = t + w * dt
        return q, p

    return step


def select_scheme(H: HamiltonianField) -> Tuple[str, Step]:
    """Stormer-Verlet for autonomous separable fields, implicit midpoint otherwise."""
    if H.is_autonomous and H.flags.is_separable:
        return "stormer_verlet", composed_step(stormer_verlet_step)
    return "implicit_midpoint", composed_step(implicit_midpoint_step)
