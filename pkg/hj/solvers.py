"""
Hamilton-Jacobi solvers.

solve_variational reads u(t, x) off the min-max value of the graph generating
function over each base point; solve_laxoleinik iterates the inf-convolution
semigroup and needs H convex in p. The two agree for convex H.
"""

import logging
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from domain.field import HamiltonianField
from genfun.onestep import one_step_gf
from minmax.complex import UNIT, build_complex
from minmax.invariants import gfqi_field
from minmax.persistence import c_value
from shared.constants import (
    DEFAULT_FIBER_NODES,
    DEFAULT_TAU,
    MAX_K,
    MAX_WINDOW_GROWTHS,
    VELOCITY_WINDOW_FACTOR,
)
from shared.errors import NotConvex, ResolutionBudget, WindowTooSmall
from shared.utils import parallel_map
from weakkam.alpha import step_count
from weakkam.laxoleinik import ValueFunction, lax_oleinik
from weakkam.legendre import LagrangianTable, legendre

from .graph import GraphAction, graph_action, graph_slice
from .solution import HJSolution, InitialDatum, as_closure

logger = logging.getLogger(__name__)

DEFAULT_SLICES = 10


def velocity_window(H: HamiltonianField, growth: int = 0) -> float:
    """Velocity window after `growth` widenings of the default 1.5 sup|H_p|."""
    return VELOCITY_WINDOW_FACTOR ** (growth + 1) * max(H.sup_dp(), 1e-3)


def evolve(make_table: Callable[[int], LagrangianTable], u0: ValueFunction, tau: float, n_steps: int,
           record: Iterable[int] = ()) -> Tuple[ValueFunction, Dict[int, ValueFunction], LagrangianTable]:
    """
    lax_oleinik with the velocity window widened whenever a minimizer reaches it.

    make_table(growth) builds the Lagrangian for the given number of widenings.
    """
    record = list(record)
    for growth in range(MAX_WINDOW_GROWTHS + 1):
        table = make_table(growth)
        try:
            final, snaps = lax_oleinik(u0, table, tau, n_steps, record=record)
            return final, snaps, table
        except WindowTooSmall as e:
            if growth == MAX_WINDOW_GROWTHS:
                raise
            logger.warning(f"{e}; widening velocity window")


def interpolation_bias(values: np.ndarray, n_steps: int) -> float:
    """Accumulated overshoot of linear interpolation, h^2 u'' / 8 per step."""
    curvature = float(np.max(np.roll(values, -1) - 2.0 * values + np.roll(values, 1)))
    return n_steps * max(curvature, 0.0) / 8.0


def record_steps(n_steps: int, n_slices: int) -> np.ndarray:
    """Up to n_slices step indices spread over 1..n_steps, last one included."""
    picks = np.rint(np.linspace(0, n_steps, max(1, int(n_slices)) + 1)[1:]).astype(int)
    return np.unique(picks[picks > 0])


def _check_convex(H: HamiltonianField) -> None:
    if not H.flags.is_convex_in_p:
        raise NotConvex(f"field '{H.name}' is not convex in p")


def solve_laxoleinik(H: HamiltonianField, f: InitialDatum, t: float, tau: float = DEFAULT_TAU,
                     n_slices: int = DEFAULT_SLICES) -> HJSolution:
    """
    Iterate the Lax-Oleinik step from f up to time t.

    Args:
        H: autonomous field convex in p
        f: initial datum (closure or ValueFunction on H.qgrid)
        t: final time, a multiple of tau
        tau: step
        n_slices: number of recorded time slices after t = 0

    Raises:
        NotConvex: H is not convex in p
        ValueError: t is not a positive multiple of tau
    """
    _check_convex(H)
    n_steps = step_count(t, tau, minimum=1)
    f = as_closure(f)
    u0 = ValueFunction.from_closure(f, H.qgrid)
    steps = record_steps(n_steps, n_slices)
    final, snaps, table = evolve(lambda g: legendre(H, xi_max=velocity_window(H, g)), u0, tau, n_steps, steps)

    values = [u0.values] + [snaps[int(s)].values for s in steps]
    dp = H.pgrid.spacing
    error = interpolation_bias(final.values, n_steps) + t * H.derivative_bounds["dpp"] * dp * dp / 8.0
    logger.info(f"Lax-Oleinik solution of '{H.name}' to t={t} ({n_steps} steps of {tau})")
    return HJSolution(
        qgrid=H.qgrid,
        times=np.concatenate([[0.0], steps * tau]),
        values=np.stack(values),
        field=H.name,
        solver="laxoleinik",
        error_estimate=error,
        metadata={"tau": tau, "xi_max": table.xi_max},
    )


def _unit_value(action: GraphAction, x: float, n_fiber: int) -> Tuple[float, float]:
    cx = build_complex(graph_slice(action, x), n_fiber=n_fiber)
    return c_value(cx, UNIT), float(cx.metadata.get("oscillation", 0.0))


def _closed_form(H: HamiltonianField, f_nodes: np.ndarray, times: np.ndarray) -> Optional[np.ndarray]:
    """Exact slices when the graph stays explicit: H = 0, or H = h(p) with f constant."""
    if H.sup_abs == 0.0:
        return np.tile(f_nodes, (times.size, 1))
    if H.flags.is_p_only and float(np.ptp(f_nodes)) == 0.0:
        h0 = float(H.evaluate(0.0, 0.0))
        return f_nodes[None, :] - times[:, None] * h0
    return None


def solve_variational(H: HamiltonianField, f: InitialDatum, t: float, steps: int = 1,
                      n_fiber: int = DEFAULT_FIBER_NODES, threads: Optional[int] = None) -> HJSolution:
    """
    u(j t / steps, x) = c(unit) of the j-step graph generating function over x.

    Args:
        H: autonomous field; non-quadratic coercive fields are truncated as in
            the min-max backend
        f: initial datum
        t: final time
        steps: number of generating-function steps (1..MAX_K)
        n_fiber: odd number of lattice nodes per fiber axis
        threads: worker threads over the base points

    Raises:
        ResolutionBudget: steps exceeds MAX_K or the complex is too large
        StepTooLarge: t / steps fails the near-identity gate
        ClassNotFound: the unit class vanished in the truncated complex
    """
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got steps={steps}")
    if steps > MAX_K:
        raise ResolutionBudget(f"steps={steps} exceeds the fiber budget MAX_K={MAX_K}")
    if t <= 0:
        raise ValueError(f"time must be positive, got t={t}")

    steps = int(steps)
    tau = t / steps
    f = as_closure(f)
    qn = H.qgrid.nodes()
    f_nodes = np.asarray(f(qn), dtype=float)
    times = tau * np.arange(steps + 1)

    exact = _closed_form(H, f_nodes, times)
    if exact is not None:
        logger.info(f"Variational solution of '{H.name}' in closed form")
        exact[0] = f_nodes
        return HJSolution(H.qgrid, times, exact, H.name, "variational",
                          metadata={"steps": steps, "reduction": "closed_form"})

    G = gfqi_field(H)
    S = one_step_gf(G, tau)
    rows, oscillation, reduction = [f_nodes], 0.0, None
    for j in range(1, steps + 1):
        action = graph_action(G, f, j * tau, j)
        reduction = action.reduction
        results = parallel_map(lambda x: _unit_value(action, float(x), n_fiber), qn, threads)
        rows.append(np.array([r[0] for r in results]))
        oscillation = max(oscillation, max(r[1] for r in results))
        logger.debug(f"t={j * tau:.4g}: {action.reduction} action on {action.fiber_dim} fiber axes")

    error = oscillation + steps * S.metadata["step_error_bound"]
    logger.info(f"Variational solution of '{H.name}' to t={t} in {steps} steps ({reduction})")
    return HJSolution(
        qgrid=H.qgrid,
        times=times,
        values=np.stack(rows),
        field=H.name,
        solver="variational",
        error_estimate=error,
        metadata={"steps": steps, "tau": tau, "n_fiber": n_fiber, "reduction": reduction},
    )
