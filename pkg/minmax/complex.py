"""
Cubical complexes over T^1 x fiber box with lower-star filtrations.

Cells live on the doubled lattice: a coordinate 2i is vertex i along that axis,
2i + 1 is the edge between vertices i and i + 1 (wrapping on the periodic base
axis). A cell's dimension is its number of odd coordinates and its value is the
max of its vertex values. Cells with a coordinate on an outer wall of a negative
axis form the exit set E and are quotiented out.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from shared.constants import (
    BOX_GROWTH,
    DEFAULT_BASE_NODES,
    DEFAULT_FIBER_NODES,
    MAX_BOX_GROWTHS,
    MAX_COMPLEX_CELLS,
)
from shared.errors import ClassNotFound, ResolutionBudget

logger = logging.getLogger(__name__)

UNIT = "unit"
FUNDAMENTAL = "fundamental"
_ALIASES = {"unit": UNIT, "1": UNIT, "fundamental": FUNDAMENTAL, "fund": FUNDAMENTAL, "mu": FUNDAMENTAL}


def normalize_class(cls: str) -> str:
    key = str(cls).lower()
    if key not in _ALIASES:
        raise ValueError(f"Unknown class: {cls}")
    return _ALIASES[key]


def doubled_size(n_nodes: int, periodic: bool) -> int:
    return 2 * n_nodes if periodic else 2 * n_nodes - 1


@dataclass(frozen=True, eq=False)
class SublevelComplex:
    """
    Lower-star filtered cubical complex relative to its exit set.

    values holds vertex values on the lattice; axis base_axis (if any) is the
    periodic x circle, the rest are fiber axes. centers gives the vertex index
    of the fiber origin along each axis; core gives inclusive vertex ranges of
    the region that holds the critical points.
    """
    values: np.ndarray
    periodic: Tuple[bool, ...]
    negative_axes: Tuple[int, ...] = ()
    centers: Optional[Tuple[int, ...]] = None
    base_axis: Optional[int] = 0
    core: Optional[Tuple[Tuple[int, int], ...]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != len(self.periodic):
            raise ValueError(f"values have {v.ndim} axes but {len(self.periodic)} periodicity flags were given")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex values must be finite")
        if min(v.shape) < 2:
            raise ValueError(f"every axis needs at least 2 vertices, got shape {v.shape}")
        for ax in self.negative_axes:
            if self.periodic[ax]:
                raise ValueError(f"negative axis {ax} cannot be periodic")
        if self.base_axis is not None and not self.periodic[self.base_axis]:
            raise ValueError(f"base axis {self.base_axis} must be periodic")
        object.__setattr__(self, "values", v)
        if self.centers is None:
            object.__setattr__(self, "centers", tuple(0 if p else n // 2 for n, p in zip(v.shape, self.periodic)))
        if self.core is None:
            object.__setattr__(self, "core", tuple((0, n - 1) for n in v.shape))

    @classmethod
    def from_vertex_values(cls, values, periodic_axes: Sequence[int] = (0,), negative_axes: Sequence[int] = (),
                           centers: Optional[Sequence[int]] = None, base_axis: Optional[int] = 0) -> "SublevelComplex":
        values = np.asarray(values, dtype=float)
        periodic = tuple(ax in set(periodic_axes) for ax in range(values.ndim))
        return cls(values=values, periodic=periodic, negative_axes=tuple(negative_axes),
                   centers=None if centers is None else tuple(centers), base_axis=base_axis)

    # shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def positive_axes(self) -> Tuple[int, ...]:
        neg = set(self.negative_axes)
        return tuple(ax for ax in range(self.ndim) if ax != self.base_axis and ax not in neg)

    @property
    def index(self) -> int:
        """Number of negative axes."""
        return len(self.negative_axes)

    @cached_property
    def shape2(self) -> Tuple[int, ...]:
        return tuple(doubled_size(n, p) for n, p in zip(self.values.shape, self.periodic))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape2))

    def degree(self, cls: str) -> int:
        cls = normalize_class(cls)
        if cls == UNIT:
            return self.index
        if self.base_axis is None:
            raise ValueError("the fundamental class needs a base circle")
        return self.index + 1

    def _axis_vector(self, ax: int, vec: np.ndarray) -> np.ndarray:
        return vec.reshape([-1 if i == ax else 1 for i in range(self.ndim)])

    # filtration

    @cached_property
    def cell_values(self) -> np.ndarray:
        out = np.full(self.shape2, -np.inf)
        out[tuple(slice(0, None, 2) for _ in range(self.ndim))] = self.values
        for ax, periodic in enumerate(self.periodic):
            even = [slice(None)] * self.ndim
            odd = [slice(None)] * self.ndim
            even[ax] = slice(0, None, 2)
            odd[ax] = slice(1, None, 2)
            ev = out[tuple(even)]
            if periodic:
                nxt = np.roll(ev, -1, axis=ax)
                out[tuple(odd)] = np.maximum(ev, nxt)
            else:
                lo = np.take(ev, np.arange(ev.shape[ax] - 1), axis=ax)
                hi = np.take(ev, np.arange(1, ev.shape[ax]), axis=ax)
                out[tuple(odd)] = np.maximum(lo, hi)
        return out

    @cached_property
    def cell_dims(self) -> np.ndarray:
        dims = np.zeros(self.shape2, dtype=np.int8)
        for ax, D in enumerate(self.shape2):
            dims += self._axis_vector(ax, (np.arange(D) % 2).astype(np.int8))
        return dims

    @cached_property
    def exit_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape2, dtype=bool)
        for ax in self.negative_axes:
            D = self.shape2[ax]
            wall = np.zeros(D, dtype=bool)
            wall[[0, D - 1]] = True
            mask |= self._axis_vector(ax, wall)
        return mask

    @cached_property
    def order(self) -> np.ndarray:
        """Flat indices of non-exit cells by (value, dimension, index)."""
        vals = self.cell_values.ravel()
        dims = self.cell_dims.ravel()
        idx = np.flatnonzero(~self.exit_mask.ravel())
        return idx[np.lexsort((idx, dims[idx], vals[idx]))]

    @cached_property
    def ranks(self) -> np.ndarray:
        ranks = np.full(self.n_cells, -1, dtype=np.int64)
        ranks[self.order] = np.arange(self.order.size)
        return ranks

    @cached_property
    def strides(self) -> Tuple[int, ...]:
        out, acc = [], 1
        for D in reversed(self.shape2):
            out.append(acc)
            acc *= D
        return tuple(reversed(out))

    def value_of_rank(self, rank: int) -> float:
        return float(self.cell_values.ravel()[self.order[rank]])

    def faces(self, flat: int):
        """Flat indices of the codimension-one faces of a cell, exit cells included."""
        coords = np.unravel_index(int(flat), self.shape2)
        out = []
        for ax, c in enumerate(coords):
            if c % 2 == 0:
                continue
            stride, D = self.strides[ax], self.shape2[ax]
            out.append(int(flat) - stride)
            if c + 1 == D:
                out.append(int(flat) + stride - D * stride)
            else:
                out.append(int(flat) + stride)
        return out

    def cells_of_dim(self, dim: int) -> np.ndarray:
        """Non-exit cells of a dimension, in filtration order."""
        dims = self.cell_dims.ravel()
        return self.order[dims[self.order] == dim]

    def target_cells(self, cls: str) -> np.ndarray:
        """Representative chain of the class: {x0} x D- (unit) or T^1 x D- (fundamental)."""
        cls = normalize_class(cls)
        self.degree(cls)
        choices = []
        neg = set(self.negative_axes)
        for ax, D in enumerate(self.shape2):
            if ax == self.base_axis:
                choices.append(np.arange(1, D, 2) if cls == FUNDAMENTAL else np.array([2 * self.centers[ax]]))
            elif ax in neg:
                choices.append(np.arange(1, D - 1, 2))
            else:
                choices.append(np.array([2 * self.centers[ax]]))
        mesh = np.meshgrid(*choices, indexing="ij")
        return np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.shape2)

    # diagnostics

    def oscillation(self) -> float:
        """Largest jump between adjacent vertices inside the core."""
        block = self.values[tuple(slice(lo, hi + 1) for lo, hi in self.core)]
        osc = 0.0
        for ax in range(self.ndim):
            if block.shape[ax] > 1:
                osc = max(osc, float(np.max(np.abs(np.diff(block, axis=ax)))))
            if self.periodic[ax] and block.shape[ax] == self.values.shape[ax]:
                wrap = np.take(block, 0, axis=ax) - np.take(block, -1, axis=ax)
                osc = max(osc, float(np.max(np.abs(wrap))))
        return osc

    def wall_margins(self) -> Dict[str, float]:
        """
        Separation of the outer walls from the core.

        exit: (min core - osc) - max over negative walls (positive axes kept in the core)
        positive: min over positive walls (negative axes kept in the core) - (max core + osc)
        """
        core = tuple(slice(lo, hi + 1) for lo, hi in self.core)
        block = self.values[core]
        osc = self.oscillation()
        lo_core, hi_core = float(np.min(block)), float(np.max(block))
        margins = {"exit": np.inf, "positive": np.inf, "oscillation": osc}

        def wall_view(ax: int, keep_core) -> np.ndarray:
            idx = [slice(None)] * self.ndim
            for other in keep_core:
                idx[other] = core[other]
            n = self.values.shape[ax]
            idx[ax] = [0, n - 1]
            return self.values[tuple(idx)]

        for ax in self.negative_axes:
            top = float(np.max(wall_view(ax, self.positive_axes)))
            margins["exit"] = min(margins["exit"], (lo_core - osc) - top)
        for ax in self.positive_axes:
            bottom = float(np.min(wall_view(ax, self.negative_axes)))
            margins["positive"] = min(margins["positive"], bottom - (hi_core + osc))
        return margins

    def describe(self) -> Dict[str, Any]:
        return {
            "shape": list(self.values.shape),
            "n_cells": self.n_cells,
            "negative_axes": list(self.negative_axes),
            "base_axis": self.base_axis,
            **self.metadata,
        }


def estimate_cells(n_base: Optional[int], fiber_sizes: Sequence[int]) -> int:
    total = doubled_size(n_base, True) if n_base else 1
    for n in fiber_sizes:
        total *= doubled_size(n, False)
    return total


def build_complex(slc, n_base: Optional[int] = None, n_fiber: int = DEFAULT_FIBER_NODES,
                  max_growths: int = MAX_BOX_GROWTHS) -> SublevelComplex:
    """
    Sample a fiber slice on T^1 x box and build its sublevel complex.

    Every fiber axis carries n_fiber uniform nodes on [-R, R] plus one node on
    each side at R sqrt(L / |lambda_i|) g^e, L the summed |eigenvalues|; e grows
    until the negative walls sit below the core and the positive walls above it.

    Raises:
        ResolutionBudget: the doubled lattice exceeds MAX_COMPLEX_CELLS
        ClassNotFound: the walls never separate from the core
    """
    if n_fiber < 3 or n_fiber % 2 == 0:
        raise ValueError(f"n_fiber must be odd and at least 3, got n_fiber={n_fiber}")
    d = slc.fiber_dim
    if slc.has_base_axis:
        r = getattr(slc.action, "r", None) or getattr(getattr(slc.action, "source", None), "r", 1)
        n_base = int(n_base) if n_base else DEFAULT_BASE_NODES * r
        if n_base < 3:
            raise ValueError(f"n_base must be at least 3, got n_base={n_base}")
    else:
        n_base = None

    if not n_base and d == 0:
        raise ValueError("a slice without base circle needs at least one fiber axis")
    sizes = [n_fiber + 2] * d
    cells = estimate_cells(n_base, sizes)
    if cells > MAX_COMPLEX_CELLS:
        raise ResolutionBudget(
            f"complex would have {cells} cells (limit {MAX_COMPLEX_CELLS}); "
            f"reduce n_fiber={n_fiber} or n_base={n_base}"
        )

    R = slc.radius
    lam = np.abs(slc.eigenvalues)
    total = float(np.sum(lam)) if d else 0.0
    reach = np.where(lam > 0, np.sqrt(total / np.where(lam > 0, lam, 1.0)), 1.0) if d else np.zeros(0)
    ticks = np.linspace(-R, R, n_fiber)
    base = np.arange(n_base) / n_base if n_base else None
    offset = 1 if n_base else 0
    periodic = (True,) * offset + (False,) * d
    negative = tuple(offset + i for i in slc.negative_axes)
    centers = (0,) * offset + (1 + n_fiber // 2,) * d
    core = ((0, n_base - 1),) * offset + ((1, n_fiber),) * d

    for growth in range(1, max_growths + 1):
        ext = R * reach * BOX_GROWTH ** growth
        axes = [np.concatenate([[-ext[i]], ticks, [ext[i]]]) for i in range(d)]
        grids = ([base] if n_base else []) + axes
        mesh = np.meshgrid(*grids, indexing="ij")
        x = mesh[0].ravel() if n_base else None
        eta = np.stack([m.ravel() for m in mesh[offset:]], axis=-1) if d else np.zeros((mesh[0].size, 0))
        values = slc.values(x, eta).reshape(mesh[0].shape)

        cx = SublevelComplex(values=values, periodic=periodic, negative_axes=negative, centers=centers,
                             base_axis=0 if n_base else None, core=core,
                             metadata={"y": slc.y, "box_radius": R, "growths": growth})
        margins = cx.wall_margins()
        if margins["exit"] > 0 and margins["positive"] > 0:
            cx.metadata.update({"oscillation": margins["oscillation"], "exit_margin": margins["exit"],
                                "positive_margin": margins["positive"]})
            logger.debug(f"Complex at y={slc.y:.4g}: shape {values.shape}, growths={growth}")
            return cx
        logger.debug(f"Walls not separated at y={slc.y:.4g} after {growth} growths: {margins}")

    raise ClassNotFound(
        f"negative end not separated from the core at y={slc.y:.4g} after {max_growths} box extensions"
    )
