"""
Self-describing field files: one JSON header line, then a long-format CSV
payload with columns q, p, H.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from shared.errors import InvalidField
from shared.storage import load_frame, provenance_header, save_frame

from .field import HamiltonianField, field_from_table
from .grids import MomentumGrid, TorusGrid

logger = logging.getLogger(__name__)


def write_field(H: HamiltonianField, path: Union[str, Path], config_hash: str = "") -> Path:
    if not H.is_autonomous:
        raise InvalidField(f"only autonomous fields are serialized (field '{H.name}')")
    qn, pn = H.qgrid.nodes(), H.pgrid.nodes()
    grid_q, grid_p = np.meshgrid(qn, pn, indexing="ij")
    df = pd.DataFrame({"q": grid_q.ravel(), "p": grid_p.ravel(), "H": H.values.ravel()})
    header = provenance_header(
        config_hash,
        kind="field",
        name=H.name,
        n_q=H.qgrid.n_nodes,
        pgrid=H.pgrid.as_dict(),
        interpolation=H.interpolation,
        flags=H.flags.as_dict(),
    )
    return save_frame(df, path, header)


def read_field(path: Union[str, Path]) -> HamiltonianField:
    """Read a field file; flags are re-inferred and must match the header."""
    header, df = load_frame(path)
    if header.get("kind") != "field":
        raise InvalidField(f"{path} is not a field file")
    qgrid = TorusGrid(int(header["n_q"]))
    pg = header["pgrid"]
    pgrid = MomentumGrid(float(pg["p_min"]), float(pg["p_max"]), int(pg["n_nodes"]))
    expected = qgrid.n_nodes * pgrid.n_nodes
    if len(df) != expected:
        raise InvalidField(f"{path} holds {len(df)} rows, grids expect {expected}")
    values = df["H"].to_numpy(dtype=float).reshape(qgrid.n_nodes, pgrid.n_nodes)
    H = field_from_table(values, qgrid, pgrid, interpolation=header.get("interpolation", "bilinear"),
                         name=header.get("name", Path(path).stem))
    stored = header.get("flags", {})
    for flag, value in stored.items():
        if H.flags.as_dict().get(flag) != value:
            logger.warning(f"Flag {flag} changed on reload of {path}: stored {value}, inferred {H.flags.as_dict()[flag]}")
    return H
