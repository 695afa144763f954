"""
Partial homogenization: freeze (q, p) and homogenize in the (x, y) pair.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from domain.field import sample_hamiltonian
from domain.grids import MomentumGrid, TorusGrid
from shared.errors import BackendInvalid, EffHamError
from shared.storage import provenance_header, save_frame
from shared.utils import parallel_map

from .operator import AUTO, HomogenizationParams, homogenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PartialTable:
    """h(y; q, p) with values[i, j, :] the curve at frozen (q_i, p_j)."""
    ygrid: MomentumGrid
    frozen_q: np.ndarray
    frozen_p: np.ndarray
    values: np.ndarray
    backends: List[str]
    error_estimate: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def curve(self, i: int, j: int) -> np.ndarray:
        return self.values[i, j]

    def to_frame(self) -> pd.DataFrame:
        Q, P, Y = np.meshgrid(self.frozen_q, self.frozen_p, self.ygrid.nodes(), indexing="ij")
        return pd.DataFrame({"q": Q.ravel(), "p": P.ravel(), "y": Y.ravel(), "h": self.values.ravel()})

    def save(self, path: Union[str, Path], config_hash: str = "") -> Path:
        header = provenance_header(config_hash, kind="partial_homogenization",
                                   backends=sorted(set(self.backends)), error_estimate=self.error_estimate)
        return save_frame(self.to_frame(), path, header)


def _slice_error(e: EffHamError, q: float, p: float) -> EffHamError:
    where = f"slice (q={q:g}, p={p:g})"
    if isinstance(e, BackendInvalid):
        return BackendInvalid(e.backend, f"{where}: {e.reason}", e.hint)
    return type(e)(f"{where}: {e}")


def partial_homogenize(H4: Callable[..., Any], xgrid: TorusGrid, ygrid: MomentumGrid,
                       frozen_q: Sequence[float], frozen_p: Sequence[float], backend: str = AUTO,
                       params: Union[None, Dict[str, Any], HomogenizationParams] = None,
                       threads: Optional[int] = None) -> PartialTable:
    """
    Homogenize H4(x, y, q, p) in (x, y) at every frozen (q, p).

    Args:
        H4: closure H4(x, y, q, p), 1-periodic in x
        xgrid, ygrid: grids of the homogenized pair
        frozen_q, frozen_p: frozen coordinates
        backend: backend for every slice ('auto' picks per slice)

    Raises:
        EffHamError: the failing slice's error, with its coordinates in the message
    """
    params = HomogenizationParams.coerce(params)
    qs = np.asarray(frozen_q, dtype=float)
    ps = np.asarray(frozen_p, dtype=float)
    jobs = [(float(q), float(p)) for q in qs for p in ps]

    def run(job):
        q, p = job
        try:
            H = sample_hamiltonian(lambda x, y: H4(x, y, q, p), xgrid, ygrid, name=f"slice(q={q:g},p={p:g})")
            return homogenize(H, backend, params.replace(pgrid=ygrid, threads=None))
        except EffHamError as e:
            raise _slice_error(e, q, p) from e

    curves = parallel_map(run, jobs, threads)
    values = np.stack([c.values for c in curves]).reshape(qs.size, ps.size, ygrid.n_nodes)
    logger.info(f"Partial homogenization over {len(jobs)} frozen slices")
    return PartialTable(
        ygrid=ygrid,
        frozen_q=qs,
        frozen_p=ps,
        values=values,
        backends=[c.backend for c in curves],
        error_estimate=max(c.error_estimate for c in curves),
        metadata={"n_x": xgrid.n_nodes},
    )
