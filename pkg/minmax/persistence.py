"""
Birth values of the unit and fundamental classes over Z/2.

The class is represented in the full complex by an explicit chain z (see
SublevelComplex.target_cells). Its birth value is the least max-value over
chains homologous to z, found by eliminating the largest cell of z against the
reduced boundary columns one degree up. Low and top degrees use union-find
shortcuts that compute the same quantity.
"""

import logging
from typing import Dict, List, Set

import numpy as np

from shared.errors import ClassNotFound

from .complex import FUNDAMENTAL, UNIT, SublevelComplex, normalize_class

logger = logging.getLogger(__name__)


class ParityUnionFind:
    """Union-find storing each node's parity relative to its root."""

    def __init__(self):
        self.parent: Dict[int, int] = {}
        self.parity: Dict[int, int] = {}
        self.rank: Dict[int, int] = {}

    def find(self, a: int):
        if a not in self.parent:
            self.parent[a] = a
            self.parity[a] = 0
            self.rank[a] = 0
            return a, 0
        path = []
        while self.parent[a] != a:
            path.append(a)
            a = self.parent[a]
        root = a
        # compress, accumulating parity from the top of the path down
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root, (self.parity[path[0]] if path else 0)

    def union(self, a: int, b: int, odd: int) -> bool:
        """Impose parity(a) ^ parity(b) == odd; False when it contradicts earlier constraints."""
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            return (pa ^ pb) == odd
        if self.rank[ra] < self.rank[rb]:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ odd
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def _neighbors(cx: SublevelComplex, flats: np.ndarray, ax: int):
    """Lower and upper neighbors of cells along ax; -1 where the lattice ends."""
    D = cx.shape2[ax]
    stride = cx.strides[ax]
    coord = (flats // stride) % D
    lower = np.where(coord == 0, (D - 1) * stride + flats if cx.periodic[ax] else -1, flats - stride)
    upper = np.where(coord == D - 1, flats - (D - 1) * stride if cx.periodic[ax] else -1, flats + stride)
    return coord, lower, upper


def _odd_cycle_birth(cx: SublevelComplex) -> float:
    """First 1-cycle winding an odd number of times around the base circle."""
    edges = cx.cells_of_dim(1)
    ends = np.empty((edges.size, 2), dtype=np.int64)
    wrap = np.zeros(edges.size, dtype=np.int8)
    for ax in range(cx.ndim):
        coord, lower, upper = _neighbors(cx, edges, ax)
        along = coord % 2 == 1
        ends[along, 0] = lower[along]
        ends[along, 1] = upper[along]
        if ax == cx.base_axis:
            wrap[along & (coord == cx.shape2[ax] - 1)] = 1
    uf = ParityUnionFind()
    for i in range(edges.size):
        if not uf.union(int(ends[i, 0]), int(ends[i, 1]), int(wrap[i])):
            return float(cx.cell_values.ravel()[edges[i]])
    raise ClassNotFound("no odd cycle around the base circle in the full complex")


def _dual_birth(cx: SublevelComplex, z: np.ndarray) -> float:
    """
    Birth of a class one below the top dimension.

    z + boundary(c) for c a set of top cells; face f survives iff
    z_f ^ c(u) ^ c(v) = 1 for its two cofaces u, v. Constraints are imposed from
    the highest face down; the first contradiction gives the birth value.
    """
    top = cx.ndim
    faces = cx.cells_of_dim(top - 1)[::-1]
    outside = cx.n_cells
    zmask = np.zeros(cx.n_cells, dtype=bool)
    zmask[z] = True
    lo = np.full(faces.size, outside, dtype=np.int64)
    hi = np.full(faces.size, outside, dtype=np.int64)
    for ax in range(top):
        coord, lower, upper = _neighbors(cx, faces, ax)
        along = coord % 2 == 0
        lo[along] = np.where(lower[along] < 0, outside, lower[along])
        hi[along] = np.where(upper[along] < 0, outside, upper[along])
    zf = zmask[faces].astype(np.int8)
    uf = ParityUnionFind()
    for i in range(faces.size):
        if not uf.union(int(lo[i]), int(hi[i]), int(zf[i])):
            return float(cx.cell_values.ravel()[faces[i]])
    raise ClassNotFound("target chain is a boundary in the full complex")


def _reduced_birth(cx: SublevelComplex, z: np.ndarray, degree: int) -> float:
    """Column reduction of the (degree + 1)-boundaries in filtration order."""
    ranks = cx.ranks
    exit_mask = cx.exit_mask.ravel()
    pivots: Dict[int, Set[int]] = {}
    for cell in cx.cells_of_dim(degree + 1):
        col = {int(ranks[f]) for f in cx.faces(int(cell)) if not exit_mask[f]}
        while col:
            low = max(col)
            if low in pivots:
                col ^= pivots[low]
            else:
                pivots[low] = col
                break
    target = {int(ranks[c]) for c in z}
    while target:
        low = max(target)
        if low not in pivots:
            return cx.value_of_rank(low)
        target ^= pivots[low]
    raise ClassNotFound("target chain is a boundary in the full complex")


def c_value(cx: SublevelComplex, cls: str) -> float:
    """
    Min-max value of the unit or fundamental class.

    Returns the least lambda for which the class lies in the image of
    H(K_lambda, E) -> H(K, E); always an attained cell value.
    """
    cls = normalize_class(cls)
    degree = cx.degree(cls)
    z = cx.target_cells(cls)
    if degree == cx.ndim:
        return float(np.max(cx.cell_values.ravel()[z]))
    if degree == 0:
        return float(np.min(cx.values))
    if cls == FUNDAMENTAL and degree == 1:
        return _odd_cycle_birth(cx)
    if degree == cx.ndim - 1:
        return _dual_birth(cx, z)
    logger.debug(f"Reducing {cx.cells_of_dim(degree + 1).size} columns for the {cls} class")
    return _reduced_birth(cx, z, degree)


def class_values(cx: SublevelComplex) -> List[float]:
    """[c(unit), c(fundamental)] of a complex with a base circle."""
    return [c_value(cx, UNIT), c_value(cx, FUNDAMENTAL)]
