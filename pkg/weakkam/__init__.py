# Convex-case oracles: Legendre transform, Lax-Oleinik semigroup, Mather alpha, level sets

from .legendre import LagrangianTable, effective_lagrangian, inverse_legendre, legendre, monotone_argmax
from .laxoleinik import ValueFunction, lax_oleinik, lax_oleinik_step
from .alpha import AlphaEstimate, alpha_curve, alpha_effective, estimate_alpha, step_count
from .levelset import LevelSetOracle, levelset_curve, levelset_oracle, mechanical_oracle

__all__ = [
    "LagrangianTable", "effective_lagrangian", "inverse_legendre", "legendre", "monotone_argmax",
    "ValueFunction", "lax_oleinik", "lax_oleinik_step",
    "AlphaEstimate", "alpha_curve", "alpha_effective", "estimate_alpha", "step_count",
    "LevelSetOracle", "levelset_curve", "levelset_oracle", "mechanical_oracle",
]
