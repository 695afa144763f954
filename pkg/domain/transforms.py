"""
Field transforms: coercive truncation and vertical shear conjugation.
"""

import logging
from typing import Callable, Optional

import numpy as np

from shared.errors import DomainTooSmall, InvalidField, RangeExceeded

from .field import HamiltonianField, _call, field_from_table, sample_hamiltonian

logger = logging.getLogger(__name__)


def cutoff(p, A: float) -> np.ndarray:
    """C^2 plateau cutoff: 1 on |p| <= A, 0 on |p| >= 2A, quintic smoothstep between."""
    s = np.clip((np.abs(np.asarray(p, dtype=float)) - A) / A, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def truncate_coercive(H: HamiltonianField, A: float) -> HamiltonianField:
    """
    Return chi(|p|) H with chi the C^2 plateau cutoff at A.

    Args:
        H: coercive or p-only autonomous field
        A: plateau radius; the support is |p| <= 2A

    Returns:
        Compactly supported field equal to H on |p| <= A

    Raises:
        DomainTooSmall: the momentum grid does not contain [-2A, 2A]
        InvalidField: H is neither coercive nor p-only
    """
    if A <= 0:
        raise ValueError(f"truncation radius must be positive, got A={A}")
    if H.metadata.get("truncated_at") == A:
        return H
    if not H.pgrid.covers(2 * A):
        raise DomainTooSmall(
            f"cutoff support [-{2 * A:g}, {2 * A:g}] exceeds pgrid [{H.pgrid.p_min:g}, {H.pgrid.p_max:g}]"
        )
    if not H.is_autonomous:
        raise InvalidField(f"truncation is defined for autonomous fields only (field '{H.name}')")
    if not H.flags.is_p_only:
        lower = H.values.min(axis=0)
        pn = H.pgrid.nodes()
        right = lower[pn >= A]
        left = lower[pn <= -A][::-1]
        if np.any(np.diff(right) < 0) or np.any(np.diff(left) < 0):
            raise InvalidField(f"field '{H.name}' is not coercive beyond |p| = {A:g}")

    meta = {"truncated_at": A, "source": H.name}
    if H.closure is not None:
        fn = H.closure
        out = sample_hamiltonian(lambda q, p: cutoff(p, A) * _call(fn, q, p), H.qgrid, H.pgrid,
                                 H.interpolation, name=f"trunc({H.name})", metadata=meta)
    else:
        out = field_from_table(H.values * cutoff(H.pgrid.nodes(), A)[None, :], H.qgrid, H.pgrid,
                               interpolation=H.interpolation, name=f"trunc({H.name})", metadata=meta)
    logger.debug(f"Truncated {H.name} at A={A}")
    return out


def shear_conjugate(H: HamiltonianField, f: Callable[[np.ndarray], np.ndarray],
                    df: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> HamiltonianField:
    """
    H o psi with psi(q, p) = (q, p + f'(q)), resampled on the same grids.

    df defaults to a central difference of f. The analytic closure is used when
    present; compactly supported tables extend by zero; otherwise momenta
    leaving the grid raise RangeExceeded.
    """
    if not H.is_autonomous:
        raise InvalidField(f"shear conjugation is defined for autonomous fields only (field '{H.name}')")
    if df is None:
        h = 1e-6
        df = lambda q: (np.asarray(f(np.asarray(q) + h)) - np.asarray(f(np.asarray(q) - h))) / (2 * h)

    qn, pn = H.qgrid.nodes(), H.pgrid.nodes()
    gap = np.abs(np.asarray(f(np.array([1.0])), dtype=float) - np.asarray(f(np.array([0.0])), dtype=float))
    if float(np.max(gap)) > 1e-9:
        raise InvalidField("shear generator f must be 1-periodic")
    slope = np.asarray(df(qn), dtype=float) * np.ones_like(qn)
    if float(np.max(np.abs(slope))) == 0.0:
        return H

    name = f"shear({H.name})"
    meta = {"source": H.name, "shear_amplitude": float(np.max(np.abs(slope)))}
    if H.closure is not None:
        fn = H.closure
        return sample_hamiltonian(lambda q, p: _call(fn, q, np.asarray(p) + np.asarray(df(q))), H.qgrid, H.pgrid,
                                  H.interpolation, name=name, metadata=meta)

    grid_q, grid_p = np.meshgrid(qn, pn, indexing="ij")
    shifted = grid_p + slope[:, None]
    outside = (shifted < H.pgrid.p_min - 1e-12) | (shifted > H.pgrid.p_max + 1e-12)
    values = H.interpolate(grid_q, shifted)
    if np.any(outside):
        if not H.flags.is_compactly_supported:
            raise RangeExceeded(
                f"p + f'(q) leaves pgrid [{H.pgrid.p_min:g}, {H.pgrid.p_max:g}]: "
                f"max |f'| = {meta['shear_amplitude']:.3g}"
            )
        values = np.where(outside, 0.0, values)
    return field_from_table(values, H.qgrid, H.pgrid, interpolation=H.interpolation, name=name, metadata=meta)
