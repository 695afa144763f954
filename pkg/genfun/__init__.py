# Generating functions: one-step data, composition and k-fold discrete actions

from .onestep import OneStepGF, one_step_gf
from .compose import CompositeGF, compose_gf
from .action import (
    DiscreteAction,
    FiberBox,
    POnlyAction,
    ReducedAction,
    build_Fk,
    coupling_matrix,
    coupling_sigma_min,
    fiber_box,
    p_index,
    reduce_action,
    reduce_momenta,
    v_index,
)
from .slices import FiberSlice, action_slice, dump_slice

__all__ = [
    "OneStepGF", "one_step_gf", "CompositeGF", "compose_gf",
    "DiscreteAction", "FiberBox", "POnlyAction", "ReducedAction", "build_Fk",
    "coupling_matrix", "coupling_sigma_min", "fiber_box", "p_index", "reduce_action",
    "reduce_momenta", "v_index", "FiberSlice", "action_slice", "dump_slice",
]
