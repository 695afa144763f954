# Hamilton-Jacobi solvers and the homogenization / long-time experiments

from .solution import HJSolution, as_closure
from .graph import GraphAction, ReducedGraphAction, graph_action, graph_slice
from .solvers import evolve, solve_laxoleinik, solve_variational
from .experiment import ExperimentTable, homogenization_experiment, longtime_slope

__all__ = [
    "HJSolution", "as_closure", "GraphAction", "ReducedGraphAction", "graph_action", "graph_slice",
    "evolve", "solve_laxoleinik", "solve_variational",
    "ExperimentTable", "homogenization_experiment", "longtime_slope",
]
