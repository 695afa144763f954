"""
One-step generating functions S(Q, p) = -tau H(Q, p).

S generates the symplectic Euler map
    (Q + dS/dp, p) -> (Q, p + dS/dQ),
i.e. Q = q + tau dH/dp(Q, p), P = p - tau dH/dq(Q, p).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from domain.field import HamiltonianField
from shared.constants import NEAR_IDENTITY_BOUND, NEWTON_MAX_ITER, NEWTON_TOL
from shared.errors import InvalidField, NewtonDivergence, StepTooLarge

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OneStepGF:
    """Generating function of one time-tau step; a fiberless generating datum."""
    H: HamiltonianField
    tau: float
    table: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    fiber_dim = 0

    @property
    def qgrid(self):
        return self.H.qgrid

    @property
    def pgrid(self):
        return self.H.pgrid

    def S(self, Q, p) -> np.ndarray:
        return -self.tau * self.H.evaluate(Q, p)

    def dS(self, Q, p) -> Tuple[np.ndarray, np.ndarray]:
        dq, dp = self.H.gradient(Q, p)
        return -self.tau * dq, -self.tau * dp

    # generating-datum interface: base (x, y) = (Q, p), no fiber

    def value(self, x, y, xi=None) -> np.ndarray:
        return self.S(x, y)

    def gradient(self, x, y, xi=None):
        sq, sp = self.dS(x, y)
        empty = np.zeros(np.shape(sq) + (0,))
        return sq, sp, empty

    def generated_map(self, q, p) -> Tuple[np.ndarray, np.ndarray]:
        """
        Image of (q, p) under the generated map; Q solves q = Q + dS/dp(Q, p)
        by fixed-point iteration (a contraction under the near-identity gate).
        """
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        Q = q.copy()
        for _ in range(NEWTON_MAX_ITER):
            _, sp = self.dS(Q, p)
            Q_next = q - sp
            if float(np.max(np.abs(Q_next - Q))) <= NEWTON_TOL:
                Q = Q_next
                break
            Q = Q_next
        else:
            raise NewtonDivergence(f"one-step map did not converge for tau={self.tau}")
        sq, _ = self.dS(Q, p)
        return Q, p + sq


def one_step_gf(H: HamiltonianField, tau: float) -> OneStepGF:
    """
    Build S = -tau H.

    Raises:
        StepTooLarge: tau sup|d2H/dqdp| >= 0.5, so Q -> Q - tau dH/dp is not
            guaranteed invertible
    """
    if tau <= 0:
        raise ValueError(f"step must be positive, got tau={tau}")
    if not H.is_autonomous:
        raise InvalidField(f"generating functions need an autonomous field (field '{H.name}')")
    bounds = H.derivative_bounds
    gate = tau * bounds["dqp"]
    if gate >= NEAR_IDENTITY_BOUND:
        raise StepTooLarge(
            f"near-identity check failed: tau*sup|H_qp| = {gate:.3g} >= {NEAR_IDENTITY_BOUND} (tau={tau})"
        )
    grad_sup = float(np.hypot(bounds["dq"], bounds["dp"]))
    meta = {
        "tau": tau,
        "near_identity": gate,
        "tau_hessian": tau * bounds["hessian"],
        "error_constant": grad_sup * bounds["hessian"],
        "step_error_bound": tau ** 2 * grad_sup * bounds["hessian"],
        "sup_abs": tau * H.sup_abs,
    }
    logger.debug(f"One-step GF for {H.name}: tau={tau}, gate={gate:.3g}")
    return OneStepGF(H=H, tau=tau, table=-tau * np.array(H.values), metadata=meta)
