"""
Run manifests and result comparison.

A run directory holds manifest.json (config, config hash, outputs with SHA-256
digests, wall-clock seconds, versions) and the payload files it lists.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from domain.effective import EffectiveHamiltonian
from shared.constants import TOOL_VERSION
from shared.errors import SchemaMismatch
from shared.storage import file_digest, load_frame, load_json, save_json, verify_file_integrity

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
CURVE_KIND = "effective_hamiltonian"
DEFAULT_DIFF_TOLERANCE = 1e-2


def versions() -> Dict[str, str]:
    import scipy

    return {"effham": TOOL_VERSION, "numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__}


@dataclass
class ResultRecord:
    """What one run wrote, keyed by output name relative to the run directory."""
    config: Dict[str, Any]
    config_hash: str
    outputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    wall_clock: float = 0.0
    status: str = "ok"
    error: Optional[str] = None
    versions: Dict[str, str] = field(default_factory=versions)

    def add(self, run_dir: Path, path: Path, kind: str) -> Path:
        rel = Path(path).relative_to(run_dir).as_posix()
        self.outputs[rel] = {"kind": kind, "sha256": file_digest(path)}
        return path

    def as_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "outputs": self.outputs,
            "wall_clock_seconds": self.wall_clock,
            "status": self.status,
            "error": self.error,
            "versions": self.versions,
        }

    def save(self, run_dir: Union[str, Path]) -> Path:
        return save_json(self.as_dict(), Path(run_dir) / MANIFEST)

    @classmethod
    def load(cls, run_dir: Union[str, Path], verify: bool = True) -> "ResultRecord":
        """Read a manifest; with verify, every listed output must match its digest."""
        run_dir = Path(run_dir)
        data = load_json(run_dir / MANIFEST)
        record = cls(
            config=data["config"],
            config_hash=data["config_hash"],
            outputs=data.get("outputs", {}),
            wall_clock=float(data.get("wall_clock_seconds", 0.0)),
            status=data.get("status", "ok"),
            error=data.get("error"),
            versions=data.get("versions", {}),
        )
        if verify:
            for rel, entry in record.outputs.items():
                verify_file_integrity(run_dir / rel, entry["sha256"])
        return record


@dataclass
class DiffTable:
    rows: List[Dict[str, Any]]
    tolerance: float

    @property
    def within_tolerance(self) -> bool:
        return all(r["within"] for r in self.rows)

    @property
    def max_sup(self) -> float:
        return max((r["sup"] for r in self.rows), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["name", "column", "sup", "l1", "tolerance", "within"])


def _curve_row(name: str, a: EffectiveHamiltonian, b: EffectiveHamiltonian, tolerance: float) -> Dict[str, Any]:
    sup = a.sup_distance(b)
    return {"name": name, "column": "h", "sup": sup, "l1": a.l1_distance(b), "tolerance": tolerance,
            "within": bool(sup <= tolerance)}


def _table_rows(name: str, a: pd.DataFrame, b: pd.DataFrame, tolerance: float) -> List[Dict[str, Any]]:
    if list(a.columns) != list(b.columns) or a.shape != b.shape:
        raise SchemaMismatch(f"{name}: columns {list(a.columns)} x {a.shape[0]} rows vs "
                             f"{list(b.columns)} x {b.shape[0]} rows")
    rows = []
    for column in a.columns:
        x = pd.to_numeric(a[column], errors="coerce").to_numpy(dtype=float)
        y = pd.to_numeric(b[column], errors="coerce").to_numpy(dtype=float)
        both = np.isnan(x) & np.isnan(y)
        if np.all(both):
            continue
        diff = np.abs(x - y)
        diff[both] = 0.0
        diff[np.isnan(diff)] = np.inf
        sup = float(np.max(diff)) if diff.size else 0.0
        rows.append({"name": name, "column": column, "sup": sup, "l1": float(np.sum(diff)),
                     "tolerance": tolerance, "within": bool(sup <= tolerance)})
    return rows


def _compare_files(name: str, path_a: Path, path_b: Path, tolerance: float) -> List[Dict[str, Any]]:
    header_a, frame_a = load_frame(path_a)
    header_b, frame_b = load_frame(path_b)
    kind_a, kind_b = header_a.get("kind"), header_b.get("kind")
    if kind_a != kind_b:
        raise SchemaMismatch(f"{name}: kind {kind_a} vs {kind_b}")
    if kind_a == CURVE_KIND:
        return [_curve_row(name, EffectiveHamiltonian.load(path_a), EffectiveHamiltonian.load(path_b), tolerance)]
    return _table_rows(name, frame_a, frame_b, tolerance)


def _tables(record: ResultRecord) -> Dict[str, str]:
    return {rel: entry["kind"] for rel, entry in record.outputs.items() if rel.endswith(".csv")}


def diff(a: Union[str, Path], b: Union[str, Path], tolerance: float = DEFAULT_DIFF_TOLERANCE) -> DiffTable:
    """
    Sup and L1 differences between two results.

    a and b are either two run directories (every CSV table both manifests list
    is compared) or two CSV files (e.g. two backend curves of the same run).
    Curves on different momentum grids are compared by interpolation.

    Raises:
        SchemaMismatch: different file kinds, columns or table sets
    """
    a, b = Path(a), Path(b)
    if a.is_dir() != b.is_dir():
        raise SchemaMismatch(f"cannot compare a directory with a file: {a} vs {b}")
    rows: List[Dict[str, Any]] = []
    if a.is_dir():
        tables_a, tables_b = _tables(ResultRecord.load(a)), _tables(ResultRecord.load(b))
        if set(tables_a) != set(tables_b):
            only = sorted(set(tables_a) ^ set(tables_b))
            raise SchemaMismatch(f"runs list different tables: {only}")
        for rel in sorted(tables_a):
            if tables_a[rel] != tables_b[rel]:
                raise SchemaMismatch(f"{rel}: kind {tables_a[rel]} vs {tables_b[rel]}")
            rows.extend(_compare_files(rel, a / rel, b / rel, tolerance))
    else:
        rows.extend(_compare_files(f"{a.name} vs {b.name}", a, b, tolerance))

    table = DiffTable(rows, tolerance)
    log = logger.info if table.within_tolerance else logger.warning
    log(f"diff {a} vs {b}: max sup {table.max_sup:.3e} (tolerance {tolerance:g})")
    return table


def pairwise_curve_diffs(curves: Dict[str, EffectiveHamiltonian], tolerance: float) -> DiffTable:
    """Sup and L1 distance between every pair of backend curves of one run."""
    names = sorted(curves)
    rows = []
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            rows.append(_curve_row(f"{x} vs {y}", curves[x], curves[y], tolerance))
    return DiffTable(rows, tolerance)
