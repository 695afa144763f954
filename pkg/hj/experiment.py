"""
Homogenization and long-time experiments for convex Hamilton-Jacobi problems.

The oscillatory problem du/dt + H(kq, du/dq) = 0 is never stepped directly:
w solves the unit-cell equation on a circle of length k from w(0, Q) = k f(Q / k)
and u_k(t, q) = w(kt, kq) / k.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from domain.field import HamiltonianField
from homog.operator import AUTO, homogenize
from shared.constants import DEFAULT_TAU, LONGTIME_HORIZONS, MAX_EXPERIMENT_NODES
from shared.errors import NotConvex, ResolutionBudget
from shared.storage import provenance_header, save_frame
from shared.utils import parallel_map
from weakkam.alpha import step_count
from weakkam.laxoleinik import ValueFunction
from weakkam.legendre import effective_lagrangian, legendre

from .solution import InitialDatum, as_closure
from .solvers import evolve, interpolation_bias, record_steps, velocity_window

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_TIMES = 5


@dataclass(frozen=True, eq=False)
class ExperimentTable:
    """e_k(t) = sup_q |u_k(t, q) - u-bar(t, q)| and the fitted rates e_k(t) ~ eps_k t."""
    ks: np.ndarray
    times: np.ndarray
    errors: np.ndarray
    rates: np.ndarray
    residuals: np.ndarray
    error_estimates: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def rate(self, k: int) -> float:
        hits = np.flatnonzero(self.ks == k)
        if hits.size == 0:
            raise KeyError(f"k={k} is not in the experiment")
        return float(self.rates[hits[0]])

    def is_decreasing(self, slack: float = 0.0) -> bool:
        """eps_k non-increasing along increasing k."""
        order = np.argsort(self.ks)
        return bool(np.all(np.diff(self.rates[order]) <= slack))

    def to_frame(self) -> pd.DataFrame:
        K, T = np.meshgrid(self.ks, self.times, indexing="ij")
        eps = np.broadcast_to(self.rates[:, None], K.shape)
        return pd.DataFrame({"k": K.ravel(), "t": T.ravel(), "e_k": self.errors.ravel(), "eps_k": eps.ravel()})

    def describe(self) -> Dict[str, Any]:
        return {
            "ks": self.ks.tolist(),
            "rates": self.rates.tolist(),
            "fit_residuals": self.residuals.tolist(),
            "error_estimates": self.error_estimates.tolist(),
            "decreasing": self.is_decreasing(),
            **self.metadata,
        }

    def save(self, path: Union[str, Path], config_hash: str = "") -> Path:
        header = provenance_header(config_hash, kind="homogenization_experiment", **self.describe())
        return save_frame(self.to_frame(), path, header)


def _fit_rate(times: np.ndarray, errors: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope through the origin and its worst residual relative to e(t_max)."""
    (eps,), *_ = np.linalg.lstsq(times[:, None], errors, rcond=None)
    residual = float(np.max(np.abs(errors - eps * times)))
    top = float(errors[-1])
    return float(eps), residual / top if top > 0 else residual


def _check_ks(H: HamiltonianField, ks: Sequence[int]) -> np.ndarray:
    out = []
    for k in ks:
        if int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got k={k}")
        nodes = int(k) * H.qgrid.n_nodes
        if nodes > MAX_EXPERIMENT_NODES:
            raise ResolutionBudget(
                f"k={k} needs {nodes} circle nodes (limit {MAX_EXPERIMENT_NODES}); lower k or n_q"
            )
        out.append(int(k))
    return np.array(out)


def homogenization_experiment(H: HamiltonianField, f: InitialDatum, k_list: Sequence[int], t: float,
                              tau: float = DEFAULT_TAU, n_times: int = DEFAULT_SAMPLE_TIMES,
                              backend: str = AUTO, threads: Optional[int] = None) -> ExperimentTable:
    """
    Compare the oscillatory solutions u_k with the homogenized solution u-bar.

    Args:
        H: autonomous field convex in p
        f: initial datum
        k_list: oscillation factors
        t: final time, a multiple of tau
        tau: step of every Lax-Oleinik run
        n_times: number of sampled times in (0, t]
        backend: homogenization backend for H-bar
        threads: worker threads over k

    Raises:
        NotConvex: H is not convex in p
        ResolutionBudget: k n_q exceeds MAX_EXPERIMENT_NODES
    """
    if not H.flags.is_convex_in_p:
        raise NotConvex(f"field '{H.name}' is not convex in p")
    ks = _check_ks(H, k_list)
    n_steps = step_count(t, tau, minimum=1)
    samples = record_steps(n_steps, n_times)
    times = samples * tau
    f = as_closure(f)
    qgrid = H.qgrid
    dp = H.pgrid.spacing
    legendre_bias = H.derivative_bounds["dpp"] * dp * dp / 8.0

    curve = homogenize(H, backend, {"pgrid": H.pgrid})
    u0 = ValueFunction.from_closure(f, qgrid)
    final, snaps, _ = evolve(lambda g: effective_lagrangian(curve, qgrid, xi_max=velocity_window(H, g)),
                             u0, tau, n_steps, samples)
    ubar = np.stack([snaps[int(s)].values for s in samples])
    ubar_error = interpolation_bias(final.values, n_steps) + t * legendre_bias + t * curve.error_estimate

    def run(k: int):
        fine = qgrid.refine(k)
        w0 = ValueFunction.from_closure(lambda q: k * f(q), fine)
        w_final, w_snaps, _ = evolve(lambda g: legendre(H, xi_max=velocity_window(H, g)).dilated(k),
                                     w0, tau, k * n_steps, k * samples)
        uk = np.stack([w_snaps[int(k * s)].values[::k] / k for s in samples])
        errors = np.max(np.abs(uk - ubar), axis=1)
        estimate = interpolation_bias(w_final.values, k * n_steps) / k + t * legendre_bias + ubar_error
        logger.info(f"k={k}: e_k(t={times[-1]:g}) = {errors[-1]:.4g}")
        return errors, estimate

    results = parallel_map(run, ks, threads)
    errors = np.stack([r[0] for r in results])
    fits = [_fit_rate(times, e) for e in errors]
    table = ExperimentTable(
        ks=ks,
        times=times,
        errors=errors,
        rates=np.array([fit[0] for fit in fits]),
        residuals=np.array([fit[1] for fit in fits]),
        error_estimates=np.array([r[1] for r in results]),
        metadata={"field": H.name, "tau": tau, "t": t, "n_q": qgrid.n_nodes, "hbar_backend": curve.backend},
    )
    if not table.is_decreasing():
        logger.warning(f"eps_k is not decreasing: {table.rates.tolist()}")
    return table


def longtime_slope(H: HamiltonianField, f: InitialDatum, q0: float = 0.0, tau: float = DEFAULT_TAU,
                   horizons: Tuple[float, float] = LONGTIME_HORIZONS) -> float:
    """
    lim u(T, q0) / T = -H-bar(0), extrapolated in 1/T from the two horizons.

    With s(T) = u(T, q0) / T and s(T) = s + c / T the limit is
    (T2 s(T2) - T1 s(T1)) / (T2 - T1), i.e. 2 s(50) - s(25) for the defaults.

    Raises:
        NotConvex: H is not convex in p
    """
    if not H.flags.is_convex_in_p:
        raise NotConvex(f"field '{H.name}' is not convex in p")
    T1, T2 = sorted(float(T) for T in horizons)
    n1, n2 = step_count(T1, tau), step_count(T2, tau)
    u0 = ValueFunction.from_closure(as_closure(f), H.qgrid)
    final, snaps, _ = evolve(lambda g: legendre(H, xi_max=velocity_window(H, g)), u0, tau, n2, [n1])
    u1 = float(snaps[n1].evaluate(q0))
    u2 = float(final.evaluate(q0))
    slope = (u2 - u1) / (T2 - T1)
    logger.info(f"Long-time slope of '{H.name}' at q={q0:g}: {slope:.6g}")
    return slope
