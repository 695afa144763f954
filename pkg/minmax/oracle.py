"""
Brute-force min-max oracle for tiny complexes.

Chains are Python integers used as GF(2) bit vectors over the cells of one
degree. For a threshold lambda the class is supported iff the part of z above
lambda lies in the span of the boundary columns restricted to cells above
lambda; the least such lambda among cell values is the min-max value.
"""

import itertools
import logging
from typing import Dict, List

import numpy as np

from shared.constants import BRUTE_ORACLE_MAX_CELLS

from .complex import SublevelComplex, normalize_class

logger = logging.getLogger(__name__)


def _cell_faces(coords, shape2, periodic):
    for ax, c in enumerate(coords):
        if c % 2 == 0:
            continue
        for delta in (-1, 1):
            nc = list(coords)
            nc[ax] = (c + delta) % shape2[ax] if periodic[ax] else c + delta
            yield tuple(nc)


def _in_span(columns: List[int], target: int) -> bool:
    basis: Dict[int, int] = {}
    for col in columns:
        while col:
            lead = col.bit_length() - 1
            if lead not in basis:
                basis[lead] = col
                break
            col ^= basis[lead]
    while target:
        lead = target.bit_length() - 1
        if lead not in basis:
            return False
        target ^= basis[lead]
    return True


def brute_cycle_oracle(cx: SublevelComplex, cls: str) -> float:
    """
    Exact min-max value of the class by exhaustive linear algebra.

    Raises:
        ValueError: the complex has more than BRUTE_ORACLE_MAX_CELLS cells
    """
    if cx.n_cells > BRUTE_ORACLE_MAX_CELLS:
        raise ValueError(f"oracle limited to {BRUTE_ORACLE_MAX_CELLS} cells, complex has {cx.n_cells}")
    cls = normalize_class(cls)
    degree = cx.degree(cls)
    values = cx.cell_values
    exit_mask = cx.exit_mask

    chains: Dict[tuple, int] = {}
    uppers = []
    for coords in itertools.product(*[range(D) for D in cx.shape2]):
        if exit_mask[coords]:
            continue
        dim = sum(c % 2 for c in coords)
        if dim == degree:
            chains[coords] = len(chains)
        elif dim == degree + 1:
            uppers.append(coords)

    cell_of_bit = {bit: coords for coords, bit in chains.items()}
    columns = []
    for coords in uppers:
        col = 0
        for face in _cell_faces(coords, cx.shape2, cx.periodic):
            if face in chains:
                col ^= 1 << chains[face]
        columns.append(col)

    z = 0
    for flat in cx.target_cells(cls):
        z ^= 1 << chains[tuple(int(c) for c in np.unravel_index(int(flat), cx.shape2))]

    def supported(level: float) -> bool:
        high = 0
        for bit, coords in cell_of_bit.items():
            if values[coords] > level:
                high |= 1 << bit
        return _in_span([c & high for c in columns], z & high)

    if _in_span(columns, z):
        raise ValueError("target chain is a boundary in the full complex")
    levels = np.unique(values[~exit_mask])
    lo, hi = 0, levels.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if supported(float(levels[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])
