"""
Experiment runner: config -> field -> operations -> payloads, figures, manifest.

Exit codes: 0 success, 1 invalid config or failed operation, 2 property-suite failure.
"""

import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from domain.effective import EffectiveHamiltonian
from domain.field import HamiltonianField
from domain.grids import MomentumGrid
from domain.presets import get_catalog
from hj.experiment import homogenization_experiment, longtime_slope
from homog.operator import AUTO, HomogenizationParams, homogenize, quasi_state
from homog.properties import check_properties, default_perturbation
from minmax.invariants import c_pm_iterates
from shared.errors import BackendInvalid, ConfigInvalid, EffHamError
from shared.logging_setup import setup_logger
from shared.storage import provenance_header, save_frame, save_json

from . import report_generator
from .config_manager import ExperimentConfig, load_config, load_settings
from .results import DEFAULT_DIFF_TOLERANCE, ResultRecord, pairwise_curve_diffs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PROPERTY_FAILURE = 2

RANDOM_TRIAL_SUITE = ("lipschitz", "sandwich")


def initial_datum(kind: str, amplitude: float) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "zero":
        return lambda q: 0.0 * np.asarray(q, dtype=float)
    if kind == "cosine":
        return lambda q: amplitude * np.cos(2 * np.pi * np.asarray(q, dtype=float))
    if kind == "sine":
        return lambda q: amplitude * np.sin(2 * np.pi * np.asarray(q, dtype=float))
    raise ValueError(f"Unknown initial datum: {kind}")


def _shear(eps: float) -> Tuple[Callable, Callable]:
    return (lambda q: eps * np.sin(2 * np.pi * np.asarray(q)) / (2 * np.pi),
            lambda q: eps * np.cos(2 * np.pi * np.asarray(q)))


class ExperimentRun:
    """One execution of a validated config inside its run directory."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.hash = config.config_hash()
        self.run_dir = config.run_dir
        self.record = ResultRecord(config=config.as_dict(), config_hash=self.hash)
        self.curves: Dict[str, EffectiveHamiltonian] = {}
        self.summary: Dict[str, Any] = {}
        self.properties_passed = True
        self.field = self.build_field()

    # inputs

    def build_field(self) -> HamiltonianField:
        catalog = get_catalog()
        g = self.config.grid
        try:
            qgrid, pgrid = catalog.default_grids(g.get("n_q"), g.get("p_min"), g.get("p_max"), g.get("n_p"))
            return catalog.build(self.config.preset, qgrid=qgrid, pgrid=pgrid,
                                 interpolation=g.get("interpolation", "bilinear"), **self.config.preset_params)
        except (ValueError, TypeError) as e:
            raise ConfigInvalid(f"$.preset: {e}") from e

    def curve_grid(self) -> Optional[MomentumGrid]:
        cg = self.config.curve_grid
        return MomentumGrid(float(cg["p_min"]), float(cg["p_max"]), int(cg["n_nodes"])) if cg else None

    def params_for(self, backend: str) -> HomogenizationParams:
        data = self.config.backend_params(backend)
        data.setdefault("tau", self.config.tau)
        data.setdefault("step", self.config.tau)
        data["threads"] = self.config.threads
        data["pgrid"] = self.curve_grid()
        try:
            return HomogenizationParams.coerce(data)
        except (ValueError, TypeError) as e:
            raise ConfigInvalid(f"$.params.{backend}: {e}") from e

    @property
    def tolerance(self) -> float:
        base = self.config.section("diff").get("tolerance", DEFAULT_DIFF_TOLERANCE)
        return float(base) * self.config.tolerance_scale

    def _frame(self, frame: pd.DataFrame, rel: str, kind: str, **extra) -> Path:
        path = save_frame(frame, self.run_dir / rel, provenance_header(self.hash, kind=kind, **extra))
        return self.record.add(self.run_dir, path, kind)

    # operations

    def curves_op(self) -> None:
        for backend in self.config.backends:
            curve = homogenize(self.field, backend, self.params_for(backend))
            self.curves[backend] = curve
            path = curve.save(self.run_dir / "curves" / f"{backend}.csv", self.hash)
            self.record.add(self.run_dir, path, "effective_hamiltonian")
            self.record.add(self.run_dir, path.with_suffix(".json"), "curve_metadata")

        if len(self.curves) > 1:
            table = pairwise_curve_diffs(self.curves, self.tolerance)
            self._frame(table.to_frame(), "curves/diff.csv", "curve_diff", tolerance=self.tolerance)
            self.summary["Backend differences"] = table.to_frame()
        svg = report_generator.plot_curves(self.curves, self.run_dir / "hbar.svg", self.hash,
                                           title=f"H-bar of {self.field.name}")
        self.record.add(self.run_dir, svg, "figure")
        self.summary["Curves"] = pd.DataFrame([
            {"backend": name, "resolved": c.backend, "error_estimate": c.error_estimate,
             "lipschitz": c.lipschitz_constant()}
            for name, c in sorted(self.curves.items())
        ])

    def c_pm_op(self) -> None:
        params = self.params_for("minmax")
        k_max = max(self.config.k_list)
        ys = params.pgrid
        sequence = c_pm_iterates(self.field, k_max, tau=params.tau, ys=ys, n_fiber=params.n_fiber,
                                 n_base=params.n_base, threads=self.config.threads)
        path = sequence.save(self.run_dir / "c_pm.csv", self.hash)
        self.record.add(self.run_dir, path, "c_pm_iterates")
        reference = next((self.curves[b] for b in sorted(self.curves)), None)
        svg = report_generator.plot_c_pm(sequence, self.run_dir / "c_pm.svg", self.hash, reference)
        self.record.add(self.run_dir, svg, "figure")
        self.summary["c+- iterates"] = sequence.to_frame()

    def properties_op(self) -> None:
        section = self.config.section("properties")
        backend = self.config.backends[0]
        params = self.params_for(backend)
        common = dict(backend=backend, params=params, tolerance_scale=self.config.tolerance_scale)
        report = check_properties(self.field, p0=float(section.get("p0", 0.0)), suite=section.get("suite"),
                                  shift=float(section.get("shift", 0.3)), k_max=int(section.get("k_max", 2)),
                                  **common)
        reports = [report]

        rng = np.random.default_rng(self.config.seed)
        pgrid = self.field.pgrid
        trials = int(section.get("trials", 0))
        draws = [(rng.uniform(-0.05, 0.05), rng.uniform(0.5 * pgrid.p_min, 0.5 * pgrid.p_max), rng.uniform(0.1, 0.5))
                 for _ in range(trials)]
        for i, (eps, p0, amplitude) in enumerate(draws):
            f, df = _shear(float(eps))
            logger.info(f"Property trial {i + 1}/{trials}: eps={eps:.4g} p0={p0:.4g} K={amplitude:.3g} bump")
            reports.append(check_properties(self.field, K=default_perturbation(self.field, float(amplitude)),
                                            f=f, df=df, p0=float(p0), suite=RANDOM_TRIAL_SUITE, **common))

        self.properties_passed = all(r.passed for r in reports)
        payload = {
            "passed": self.properties_passed,
            "seed": self.config.seed,
            "config_hash": self.hash,
            "base": report.as_dict(),
            "trials": [{"eps": float(e), "p0": float(p), "amplitude": float(a), **r.as_dict()}
                       for (e, p, a), r in zip(draws, reports[1:])],
        }
        path = save_json(payload, self.run_dir / "properties.json")
        self.record.add(self.run_dir, path, "property_report")
        self.summary["Properties"] = pd.DataFrame([
            {"property": r.property, "slack": r.slack, "budget": r.budget,
             "pass": "skipped" if r.skipped else r.passed}
            for rep in reports for r in rep.results
        ])

    def experiment_op(self) -> None:
        section = self.config.section("experiment")
        f = initial_datum(section.get("initial", "cosine"), float(section.get("amplitude", 0.1)))
        table = homogenization_experiment(self.field, f, self.config.k_list, float(section.get("t", 1.0)),
                                          tau=self.config.tau, n_times=int(section.get("n_times", 5)),
                                          threads=self.config.threads)
        path = table.save(self.run_dir / "experiment.csv", self.hash)
        self.record.add(self.run_dir, path, "homogenization_experiment")
        svg = report_generator.plot_experiment(table, self.run_dir / "e_k.svg", self.hash)
        self.record.add(self.run_dir, svg, "figure")
        self.summary["Homogenization experiment"] = pd.DataFrame({
            "k": table.ks, "eps_k": table.rates, "fit_residual": table.residuals,
            "error_estimate": table.error_estimates,
        })

    def longtime_op(self) -> None:
        section = self.config.section("experiment")
        f = initial_datum(section.get("initial", "cosine"), float(section.get("amplitude", 0.1)))
        slope = longtime_slope(self.field, f, tau=self.config.tau)
        hbar0 = quasi_state(self.field, 0.0, AUTO, self.params_for(AUTO))
        frame = pd.DataFrame({"q0": [0.0], "slope": [slope], "minus_hbar0": [-hbar0],
                              "gap": [abs(slope + hbar0)]})
        self._frame(frame, "longtime.csv", "longtime_slope")
        self.summary["Long-time slope"] = frame

    OPERATIONS = {
        "curves": curves_op,
        "c_pm": c_pm_op,
        "properties": properties_op,
        "experiment": experiment_op,
        "longtime": longtime_op,
    }

    def execute(self) -> int:
        start = time.perf_counter()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Run '{self.config.name}' ({self.hash[:12]}) on preset {self.config.preset} -> {self.run_dir}")
        code = EXIT_OK
        try:
            for name in self.config.operations:
                logger.info(f"Operation {name}")
                self.OPERATIONS[name](self)
        except BackendInvalid as e:
            logger.error(f"{e}")
            self.record.status, self.record.error, code = "error", str(e), EXIT_ERROR
        except (EffHamError, ValueError) as e:
            logger.error(f"Operation failed: {type(e).__name__}: {e}")
            self.record.status, self.record.error = "error", f"{type(e).__name__}: {e}"
            code = EXIT_ERROR

        if code == EXIT_OK and not self.properties_passed:
            self.record.status, code = "property_failure", EXIT_PROPERTY_FAILURE
        if self.summary:
            md = report_generator.render_summary(self.run_dir, self.config.name, self.hash, self.summary)
            self.record.add(self.run_dir, md, "summary")
        self.record.wall_clock = time.perf_counter() - start
        self.record.save(self.run_dir)
        logger.info(f"Run '{self.config.name}' finished with status {self.record.status} "
                    f"in {self.record.wall_clock:.1f}s")
        return code


def run(config_path: Union[str, Path], seed: Optional[int] = None, out: Optional[str] = None,
        threads: Optional[int] = None, tolerance_scale: Optional[float] = None) -> int:
    """Run one experiment config; returns the process exit code."""
    setup_logger()
    try:
        config = load_config(config_path, seed=seed, out=out, threads=threads, tolerance_scale=tolerance_scale)
        experiment = ExperimentRun(config)
    except (ConfigInvalid, FileNotFoundError) as e:
        logger.error(f"Invalid config {config_path}: {e}")
        return EXIT_ERROR
    except EffHamError as e:
        logger.error(f"Cannot build preset: {e}")
        return EXIT_ERROR
    return experiment.execute()


def check(preset: str, backend: str = AUTO, seed: int = 0, out: Optional[str] = None,
          threads: Optional[int] = None, tolerance_scale: Optional[float] = None, trials: int = 0) -> int:
    """Property suite only, on a preset with its default grids."""
    setup_logger()
    data = {"name": f"check-{preset}", "preset": preset, "operations": ["properties"], "backends": [backend],
            "seed": seed, "params": {"properties": {"trials": trials}}}
    try:
        settings = load_settings()
        config = ExperimentConfig.from_dict(data)
        config.output_dir = out if out is not None else settings.output_dir
        config.threads = threads if threads is not None else settings.threads
        config.tolerance_scale = tolerance_scale if tolerance_scale is not None else settings.tolerance_scale
        experiment = ExperimentRun(config)
    except EffHamError as e:
        logger.error(f"{e}")
        return EXIT_ERROR
    return experiment.execute()
