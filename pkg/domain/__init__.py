# Grids, sampled Hamiltonian fields, presets and field transforms

from .grids import MomentumGrid, TorusGrid
from .field import FieldFlags, HamiltonianField, QuadraticProfile, field_from_table, infer_flags, sample_hamiltonian
from .presets import PresetCatalog, bump, get_catalog, list_presets
from .transforms import cutoff, shear_conjugate, truncate_coercive
from .io import read_field, write_field
from .effective import BACKENDS, EffectiveHamiltonian

__all__ = [
    "TorusGrid", "MomentumGrid", "FieldFlags", "HamiltonianField", "QuadraticProfile",
    "field_from_table", "infer_flags", "sample_hamiltonian", "PresetCatalog", "bump",
    "get_catalog", "list_presets", "cutoff", "shear_conjugate", "truncate_coercive",
    "read_field", "write_field", "BACKENDS", "EffectiveHamiltonian",
]
