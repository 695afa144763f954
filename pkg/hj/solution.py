"""
Sampled solutions u(t, q) of du/dt + H(q, du/dq) = 0 with u(0, .) = f.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Union

import numpy as np
import pandas as pd

from domain.grids import TorusGrid
from shared.storage import provenance_header, save_frame
from weakkam.laxoleinik import ValueFunction

logger = logging.getLogger(__name__)

InitialDatum = Union[Callable[[np.ndarray], np.ndarray], ValueFunction]

TIME_TOL = 1e-9


def as_closure(f: InitialDatum) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized q -> f(q) for a closure or a sampled ValueFunction."""
    if isinstance(f, ValueFunction):
        return f.evaluate
    return lambda q: np.broadcast_to(np.asarray(f(np.asarray(q, dtype=float)), dtype=float), np.shape(q))


@dataclass(frozen=True, eq=False)
class HJSolution:
    """values[i] = u(times[i], q) on qgrid; values[0] is the initial datum."""
    qgrid: TorusGrid
    times: np.ndarray
    values: np.ndarray
    field: str
    solver: str
    error_estimate: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (times.size, self.qgrid.n_nodes):
            raise ValueError(f"expected values of shape {(times.size, self.qgrid.n_nodes)}, got {values.shape}")
        if times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must start at 0 and increase")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    @property
    def t(self) -> float:
        return float(self.times[-1])

    def index(self, t: float) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) <= TIME_TOL * max(1.0, abs(t)))
        if hits.size == 0:
            raise ValueError(f"no time slice at t={t}; available: {self.times.tolist()}")
        return int(hits[0])

    def at(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def value_function(self, i: int = -1) -> ValueFunction:
        return ValueFunction(self.qgrid, self.values[i], t=float(self.times[i]))

    def action_bound_excess(self, sup_H: float) -> float:
        """max over slice pairs of sup|u(t) - u(s)| - sup|H| |t - s|; <= 0 when the bound holds."""
        jumps = np.max(np.abs(self.values[:, None, :] - self.values[None, :, :]), axis=-1)
        gaps = np.abs(self.times[:, None] - self.times[None, :])
        return float(np.max(jumps - sup_H * gaps))

    def drift_removed(self, hbar0: float) -> np.ndarray:
        """u(t, q) + t H-bar(0), bounded in t for convex H."""
        return self.values + self.times[:, None] * hbar0

    def to_frame(self) -> pd.DataFrame:
        T, Q = np.meshgrid(self.times, self.qgrid.nodes(), indexing="ij")
        return pd.DataFrame({"t": T.ravel(), "q": Q.ravel(), "u": self.values.ravel()})

    def describe(self) -> Dict[str, Any]:
        return {
            "field": self.field,
            "solver": self.solver,
            "n_q": self.qgrid.n_nodes,
            "times": self.times.tolist(),
            "error_estimate": self.error_estimate,
            **self.metadata,
        }

    def save(self, path: Union[str, Path], config_hash: str = "") -> Path:
        header = provenance_header(config_hash, kind="hj_solution", **self.describe())
        logger.info(f"Saving {self.solver} solution of '{self.field}' to {path}")
        return save_frame(self.to_frame(), path, header)
