"""
Pairwise composition of generating data.

A generating datum is anything with fiber_dim, value(x, y, xi) and
gradient(x, y, xi) -> (dx, dy, dxi). Composing S1 and S2 gives

    S(x, y; xi1, xi2, p1, q2) = S1(x, p1; xi1) + S2(q2, y; xi2) + (p1 - y)(x - q2)

with the two extra fiber variables appended after the inner fibers.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from shared.errors import GridMismatch


def _split(xi: np.ndarray, n1: int, n2: int):
    xi = np.asarray(xi, dtype=float)
    return xi[..., :n1], xi[..., n1:n1 + n2], xi[..., n1 + n2], xi[..., n1 + n2 + 1]


@dataclass(frozen=True, eq=False)
class CompositeGF:
    first: Any
    second: Any

    @property
    def fiber_dim(self) -> int:
        return self.first.fiber_dim + self.second.fiber_dim + 2

    @property
    def qgrid(self):
        return self.first.qgrid

    @property
    def pgrid(self):
        return self.first.pgrid

    def value(self, x, y, xi) -> np.ndarray:
        xi1, xi2, p1, q2 = _split(xi, self.first.fiber_dim, self.second.fiber_dim)
        return self.first.value(x, p1, xi1) + self.second.value(q2, y, xi2) + (p1 - y) * (x - q2)

    def gradient(self, x, y, xi):
        xi1, xi2, p1, q2 = _split(xi, self.first.fiber_dim, self.second.fiber_dim)
        ax, ay, axi = self.first.gradient(x, p1, xi1)
        bx, by, bxi = self.second.gradient(q2, y, xi2)
        dx = ax + (p1 - y)
        dy = by - (x - q2)
        dp1 = ay + (x - q2)
        dq2 = bx - (p1 - y)
        shape = np.broadcast(np.asarray(x), np.asarray(y), p1).shape
        parts = [
            np.broadcast_to(axi, shape + (self.first.fiber_dim,)),
            np.broadcast_to(bxi, shape + (self.second.fiber_dim,)),
            np.broadcast_to(dp1, shape)[..., None],
            np.broadcast_to(dq2, shape)[..., None],
        ]
        return np.broadcast_to(dx, shape), np.broadcast_to(dy, shape), np.concatenate(parts, axis=-1)


def compose_gf(S1, S2) -> CompositeGF:
    """Composite generating datum; both inputs must share grids."""
    if S1.qgrid != S2.qgrid or S1.pgrid != S2.pgrid:
        raise GridMismatch(f"cannot compose generating data on different grids: {S1.qgrid}/{S1.pgrid} vs {S2.qgrid}/{S2.pgrid}")
    return CompositeGF(first=S1, second=S2)
