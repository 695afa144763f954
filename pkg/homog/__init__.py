# The homogenization operator, partial homogenization and the property suite

from domain.effective import BACKENDS, EffectiveHamiltonian

from .operator import AUTO, HomogenizationParams, homogenize, quasi_state, select_backend, validate_backend
from .partial import PartialTable, partial_homogenize
from .properties import (
    PROPERTIES,
    PropertyReport,
    PropertyResult,
    check_properties,
    common_backend,
    default_perturbation,
    uncertainty,
)

__all__ = [
    "BACKENDS", "EffectiveHamiltonian", "AUTO", "HomogenizationParams", "homogenize", "quasi_state",
    "select_backend", "validate_backend", "PartialTable", "partial_homogenize", "PROPERTIES",
    "PropertyReport", "PropertyResult", "check_properties", "common_backend", "default_perturbation",
    "uncertainty",
]
