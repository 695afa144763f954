"""
Fixed-y slices of a discrete action in principal fiber coordinates.

A slice evaluates G(x, eta) = G(x, y; c + U eta) where c is the fiber box center
and U diagonalizes the quadratic part of G. Negative axes are the directions
along which G decreases without bound.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from shared.constants import MIN_BOX_RADIUS
from shared.errors import ResolutionBudget
from shared.storage import provenance_header, save_frame

from .action import FiberBox

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-12
MAX_DUMP_ROWS = 200_000


@dataclass(frozen=True, eq=False)
class FiberSlice:
    action: Any
    y: float
    box: FiberBox
    axes: np.ndarray
    eigenvalues: np.ndarray
    x_fixed: Optional[float] = None

    @property
    def fiber_dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def negative_axes(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.eigenvalues < 0))

    @property
    def radius(self) -> float:
        """Half-width of the principal-axis cube that contains the fiber box."""
        return max(self.box.norm, MIN_BOX_RADIUS)

    @property
    def has_base_axis(self) -> bool:
        return self.x_fixed is None

    def values(self, x, eta) -> np.ndarray:
        """G at base points x and principal offsets eta of shape (..., fiber_dim)."""
        eta = np.asarray(eta, dtype=float)
        if self.x_fixed is not None:
            x = np.full(eta.shape[:-1], self.x_fixed)
        xi = self.box.center + eta @ self.axes.T
        return np.asarray(self.action.normalized(x, self.y, xi), dtype=float)

    def describe(self) -> Dict[str, Any]:
        info = dict(self.action.describe())
        info.update({
            "y": self.y,
            "negative_axes": list(self.negative_axes),
            "eigenvalues": self.eigenvalues.tolist(),
            "box_radius": self.radius,
            "x_fixed": self.x_fixed,
        })
        return info


def action_slice(action, y: float, x_fixed: Optional[float] = None) -> FiberSlice:
    """Slice of a (possibly reduced) action at momentum y."""
    box = action.box(y)
    quad = -np.asarray(action.quadratic_matrix(), dtype=float) / action.total_time
    if quad.size:
        w, U = np.linalg.eigh(quad)
        scale = float(np.max(np.abs(w)))
        w = np.where(np.abs(w) <= EIGEN_TOL * max(scale, 1.0), 0.0, w)
    else:
        w, U = np.zeros(0), np.zeros((0, 0))
    return FiberSlice(action=action, y=float(y), box=box, axes=U, eigenvalues=w, x_fixed=x_fixed)


def dump_slice(slc: FiberSlice, path: Union[str, Path], n_x: int = 16, n_fiber: int = 9,
               config_hash: str = "") -> Path:
    """Write G sampled on an x-by-fiber lattice to CSV for inspection."""
    d = slc.fiber_dim
    xs = np.arange(n_x) / n_x if slc.has_base_axis else np.array([slc.x_fixed])
    rows = len(xs) * n_fiber ** d
    if rows > MAX_DUMP_ROWS:
        raise ResolutionBudget(f"slice dump would have {rows} rows (limit {MAX_DUMP_ROWS})")

    ticks = np.linspace(-slc.radius, slc.radius, n_fiber)
    mesh = np.meshgrid(xs, *([ticks] * d), indexing="ij")
    flat = [m.ravel() for m in mesh]
    eta = np.stack(flat[1:], axis=-1) if d else np.zeros((flat[0].size, 0))
    G = slc.values(flat[0], eta)

    columns = {"x": flat[0]}
    for i in range(d):
        columns[f"eta_{i + 1}"] = flat[i + 1]
    columns["G"] = G
    header = provenance_header(config_hash, kind="fiber_slice", **slc.describe())
    logger.info(f"Dumping slice y={slc.y:.4g} ({rows} rows) to {path}")
    return save_frame(pd.DataFrame(columns), path, header)
