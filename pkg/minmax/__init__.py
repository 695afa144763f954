# Min-max critical values of discrete actions over sampled cubical complexes

from .complex import FUNDAMENTAL, UNIT, SublevelComplex, build_complex, estimate_cells, normalize_class
from .persistence import ParityUnionFind, c_value, class_values
from .oracle import brute_cycle_oracle
from .invariants import (
    SpectralInvariants,
    SpectralSequence,
    c_pm_iterates,
    gfqi_field,
    hk_curve,
    map_invariants,
    slice_sweep,
    spectral_invariants,
)

__all__ = [
    "UNIT", "FUNDAMENTAL", "SublevelComplex", "build_complex", "estimate_cells", "normalize_class",
    "ParityUnionFind", "c_value", "class_values", "brute_cycle_oracle",
    "SpectralInvariants", "SpectralSequence", "c_pm_iterates", "gfqi_field", "hk_curve",
    "map_invariants", "slice_sweep", "spectral_invariants",
]
