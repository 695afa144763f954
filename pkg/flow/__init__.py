# Hamiltonian flows, the rho_k conjugation and time averaging

from .integrators import implicit_midpoint_step, select_scheme, stormer_verlet_step, triple_jump_weights
from .trajectory import PhasePoint, Trajectory, integrate, propagate, rescale_conjugate, resolve_dt
from .flowmap import FlowMap, flow_map
from .averaging import time_average

__all__ = [
    "implicit_midpoint_step", "select_scheme", "stormer_verlet_step", "triple_jump_weights",
    "PhasePoint", "Trajectory", "integrate", "propagate", "rescale_conjugate", "resolve_dt",
    "FlowMap", "flow_map", "time_average",
]
