"""
Sampling grids for the torus coordinate q and the momentum p.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    """Equispaced nodes j/n on the period-1 circle; index arithmetic wraps."""
    n_nodes: int

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise ValueError(f"TorusGrid needs a positive integer node count, got n_nodes={self.n_nodes}")

    @property
    def spacing_exact(self) -> Fraction:
        return Fraction(1, self.n_nodes)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_nodes

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) / self.n_nodes

    def wrap(self, index):
        return np.mod(index, self.n_nodes)

    def refine(self, factor: int) -> "TorusGrid":
        return TorusGrid(self.n_nodes * int(factor))


@dataclass(frozen=True)
class MomentumGrid:
    """Equispaced momentum nodes, endpoints included."""
    p_min: float
    p_max: float
    n_nodes: int

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise ValueError(f"MomentumGrid needs p_min < p_max, got p_min={self.p_min}, p_max={self.p_max}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise ValueError(f"MomentumGrid needs at least 2 nodes, got n_nodes={self.n_nodes}")

    @property
    def spacing(self) -> float:
        return (self.p_max - self.p_min) / (self.n_nodes - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_nodes)

    def contains(self, p, slack: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all((p >= self.p_min - slack) & (p <= self.p_max + slack)))

    def covers(self, radius: float) -> bool:
        return self.p_min <= -radius and self.p_max >= radius

    def as_dict(self) -> dict:
        return {"p_min": float(self.p_min), "p_max": float(self.p_max), "n_nodes": int(self.n_nodes)}
