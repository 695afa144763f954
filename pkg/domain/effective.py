"""
Sampled effective Hamiltonians h(p) produced by the homogenization backends.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from shared.storage import load_frame, load_json, provenance_header, save_frame, save_json

from .field import HamiltonianField, field_from_table
from .grids import MomentumGrid, TorusGrid

logger = logging.getLogger(__name__)

BACKENDS = ("minmax", "weakkam", "levelset", "exact_p_only")
CURVE_COLUMNS = ["p", "h", "c_minus", "c_plus"]


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """h(p) on a momentum grid, with the backend that produced it and its error estimate."""
    pgrid: MomentumGrid
    values: np.ndarray
    backend: str
    k: Optional[int] = None
    tau: Optional[float] = None
    resolutions: Dict[str, Any] = field(default_factory=dict)
    error_estimate: float = 0.0
    c_minus: Optional[np.ndarray] = None
    c_plus: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"Unknown backend: {self.backend}")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.pgrid.n_nodes,):
            raise ValueError(f"expected {self.pgrid.n_nodes} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def nodes(self) -> np.ndarray:
        return self.pgrid.nodes()

    def evaluate(self, p) -> np.ndarray:
        return np.interp(np.asarray(p, dtype=float), self.nodes(), self.values)

    def lipschitz_constant(self) -> float:
        if self.values.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values))) / self.pgrid.spacing)

    def max_jump(self) -> float:
        return float(np.max(np.abs(np.diff(self.values)))) if self.values.size > 1 else 0.0

    def _aligned(self, other: "EffectiveHamiltonian") -> np.ndarray:
        if other.pgrid == self.pgrid:
            return other.values
        return other.evaluate(self.nodes())

    def sup_distance(self, other: "EffectiveHamiltonian") -> float:
        return float(np.max(np.abs(self.values - self._aligned(other))))

    def l1_distance(self, other: "EffectiveHamiltonian") -> float:
        diff = np.abs(self.values - self._aligned(other))
        return float(trapezoid(diff, self.nodes()))

    def with_values(self, values, **changes) -> "EffectiveHamiltonian":
        data = {
            "pgrid": self.pgrid, "values": values, "backend": self.backend, "k": self.k, "tau": self.tau,
            "resolutions": dict(self.resolutions), "error_estimate": self.error_estimate,
            "metadata": dict(self.metadata),
        }
        data.update(changes)
        return EffectiveHamiltonian(**data)

    def as_field(self, qgrid: TorusGrid, name: Optional[str] = None) -> HamiltonianField:
        """The p-only field with row h."""
        table = np.tile(self.values, (qgrid.n_nodes, 1))
        return field_from_table(table, qgrid, self.pgrid, name=name or f"hbar[{self.backend}]",
                                metadata={"backend": self.backend})

    def describe(self) -> Dict[str, Any]:
        return {
            "backend": self.backend,
            "k": self.k,
            "tau": self.tau,
            "pgrid": self.pgrid.as_dict(),
            "resolutions": self.resolutions,
            "error_estimate": self.error_estimate,
            "lipschitz": self.lipschitz_constant(),
            **self.metadata,
        }

    def to_frame(self) -> pd.DataFrame:
        nan = np.full(self.values.shape, np.nan)
        return pd.DataFrame({
            "p": self.nodes(),
            "h": self.values,
            "c_minus": nan if self.c_minus is None else self.c_minus,
            "c_plus": nan if self.c_plus is None else self.c_plus,
        })

    def save(self, path: Union[str, Path], config_hash: str = "") -> Path:
        """Write the curve CSV and a JSON metadata file next to it."""
        path = Path(path)
        header = provenance_header(config_hash, kind="effective_hamiltonian", backend=self.backend)
        save_frame(self.to_frame(), path, header)
        save_json({"config_hash": config_hash, **self.describe()}, path.with_suffix(".json"))
        logger.info(f"Saved {self.backend} curve to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EffectiveHamiltonian":
        path = Path(path)
        header, df = load_frame(path)
        meta = load_json(path.with_suffix(".json")) if path.with_suffix(".json").exists() else {}
        p = df["p"].to_numpy()
        pgrid = MomentumGrid(float(p[0]), float(p[-1]), int(p.size))
        c_minus = df["c_minus"].to_numpy()
        c_plus = df["c_plus"].to_numpy()
        return cls(
            pgrid=pgrid,
            values=df["h"].to_numpy(),
            backend=header.get("backend", meta.get("backend", "exact_p_only")),
            k=meta.get("k"),
            tau=meta.get("tau"),
            resolutions=meta.get("resolutions", {}),
            error_estimate=float(meta.get("error_estimate", 0.0)),
            c_minus=None if np.all(np.isnan(c_minus)) else c_minus,
            c_plus=None if np.all(np.isnan(c_plus)) else c_plus,
        )
