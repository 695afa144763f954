"""
Analytic preset catalog.

Each preset is a closure family declared in configs/presets.yaml with its
default parameters and claimed flags. Building a preset samples the closure and
checks the claims against the inferred flags.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from shared.errors import InvalidField

from .field import Closure, HamiltonianField, sample_hamiltonian
from .grids import MomentumGrid, TorusGrid

logger = logging.getLogger(__name__)

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"
PRESETS_YAML = CONFIGS_DIR / "presets.yaml"


def bump(p, width: float = 1.5) -> np.ndarray:
    """Smooth bump exp(1 - 1/(1 - (p/w)^2)) on |p| < w; equals 1 at p=0."""
    s = np.asarray(p, dtype=float) / width
    inside = np.abs(s) < 1.0
    safe = np.where(inside, 1.0 - s * s, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)


def _free(**_) -> Closure:
    return lambda q, p: 0.5 * np.asarray(p) ** 2 + 0.0 * np.asarray(q)


def _shifted_free(shift: float = 0.3) -> Closure:
    return lambda q, p: 0.5 * np.asarray(p) ** 2 + shift + 0.0 * np.asarray(q)


def _p_only(coefficients: Sequence[float] = (0.0, 0.0, 0.5)) -> Closure:
    poly = np.polynomial.Polynomial(list(coefficients))
    return lambda q, p: poly(np.asarray(p, dtype=float)) + 0.0 * np.asarray(q)


def _pendulum(amplitude: float = 1.0) -> Closure:
    return lambda q, p: 0.5 * np.asarray(p) ** 2 - amplitude * np.sin(np.pi * np.asarray(q)) ** 2


def _inverted_pendulum(amplitude: float = 1.0) -> Closure:
    return lambda q, p: 0.5 * np.asarray(p) ** 2 + amplitude * np.sin(np.pi * np.asarray(q)) ** 2


def _shear_pendulum(amplitude: float = 1.0, eps: float = 0.1) -> Closure:
    def closure(q, p):
        q = np.asarray(q)
        return 0.5 * (np.asarray(p) + eps * np.cos(2 * np.pi * q)) ** 2 - amplitude * np.sin(np.pi * q) ** 2
    return closure


def _quartic(amplitude: float = 0.5) -> Closure:
    return lambda q, p: 0.25 * np.asarray(p) ** 4 - amplitude * np.sin(np.pi * np.asarray(q)) ** 2


def _bump_in_p(width: float = 1.5) -> Closure:
    return lambda q, p: bump(p, width) + 0.0 * np.asarray(q)


def _cosine_bump(width: float = 1.5) -> Closure:
    return lambda q, p: np.cos(2 * np.pi * np.asarray(p)) * bump(p, width) + 0.0 * np.asarray(q)


def _pulsed_free(time_slices: int = 16) -> Closure:
    return lambda t, q, p: (1.0 + np.cos(2 * np.pi * np.asarray(t))) * 0.5 * np.asarray(p) ** 2 + 0.0 * np.asarray(q)


BUILDERS: Dict[str, Callable[..., Closure]] = {
    "free": _free,
    "shifted_free": _shifted_free,
    "p_only": _p_only,
    "pendulum": _pendulum,
    "inverted_pendulum": _inverted_pendulum,
    "shear_pendulum": _shear_pendulum,
    "quartic": _quartic,
    "bump_in_p": _bump_in_p,
    "cosine_bump": _cosine_bump,
    "pulsed_free": _pulsed_free,
}

TIME_DEPENDENT = {"pulsed_free"}


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    defaults: Dict[str, Any]
    claimed_flags: Dict[str, bool]
    time_dependent: bool = False


@dataclass
class PresetCatalog:
    """Named Hamiltonian constructors with truthful flags."""
    path: Path = PRESETS_YAML
    presets: Dict[str, Preset] = field(default_factory=dict)
    grid_defaults: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        with open(self.path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
        self.grid_defaults = dict(raw.get("grid", {}))
        for name, entry in (raw.get("presets") or {}).items():
            if name not in BUILDERS:
                raise ValueError(f"Unknown preset in {self.path}: {name}")
            self.presets[name] = Preset(
                name=name,
                description=entry.get("description", ""),
                defaults=dict(entry.get("params") or {}),
                claimed_flags=dict(entry.get("flags") or {}),
                time_dependent=name in TIME_DEPENDENT,
            )

    def names(self) -> List[str]:
        return sorted(self.presets)

    def get(self, name: str) -> Preset:
        if name not in self.presets:
            raise ValueError(f"Unknown preset: {name}")
        return self.presets[name]

    def default_grids(self, n_q: Optional[int] = None, p_min: Optional[float] = None,
                      p_max: Optional[float] = None, n_p: Optional[int] = None) -> Tuple[TorusGrid, MomentumGrid]:
        g = self.grid_defaults
        qgrid = TorusGrid(int(n_q if n_q is not None else g.get("n_q", 64)))
        pgrid = MomentumGrid(
            float(p_min if p_min is not None else g.get("p_min", -3.0)),
            float(p_max if p_max is not None else g.get("p_max", 3.0)),
            int(n_p if n_p is not None else g.get("n_p", 129)),
        )
        return qgrid, pgrid

    def closure(self, name: str, **params) -> Closure:
        preset = self.get(name)
        merged = dict(preset.defaults)
        merged.update(params)
        return BUILDERS[name](**merged)

    def build(self, name: str, qgrid: Optional[TorusGrid] = None, pgrid: Optional[MomentumGrid] = None,
              interpolation: str = "bilinear", **params) -> HamiltonianField:
        """
        Sample a preset and verify its claimed flags.

        Raises:
            ValueError: unknown preset name
            InvalidField: a claimed flag does not hold on the sampled field
        """
        preset = self.get(name)
        merged = dict(preset.defaults)
        merged.update(params)
        if qgrid is None or pgrid is None:
            dq, dp = self.default_grids()
            qgrid = qgrid or dq
            pgrid = pgrid or dp
        closure = BUILDERS[name](**merged)
        time_slices = int(merged["time_slices"]) if preset.time_dependent else None
        h = sample_hamiltonian(closure, qgrid, pgrid, interpolation, time_slices=time_slices, name=name,
                               metadata={"preset": name, "params": merged})
        self.verify_flags(h, preset.claimed_flags)
        logger.debug(f"Built preset {name} with params {merged}")
        return h

    @staticmethod
    def verify_flags(h: HamiltonianField, claimed: Dict[str, bool]) -> None:
        inferred = h.flags.as_dict()
        for flag, value in claimed.items():
            if flag not in inferred:
                raise ValueError(f"Unknown flag: {flag}")
            if inferred[flag] != bool(value):
                raise InvalidField(f"preset '{h.name}' claims {flag}={value} but sampling gives {inferred[flag]}")

    # named constructors

    def pendulum(self, amplitude: float = 1.0, **grids) -> HamiltonianField:
        return self.build("pendulum", amplitude=amplitude, **grids)

    def bump_in_p(self, width: float = 1.5, **grids) -> HamiltonianField:
        return self.build("bump_in_p", width=width, **grids)

    def p_only(self, h: Union[Callable[[np.ndarray], np.ndarray], Sequence[float]],
               qgrid: Optional[TorusGrid] = None, pgrid: Optional[MomentumGrid] = None,
               name: str = "p_only") -> HamiltonianField:
        """p-only field from a profile h(p) or polynomial coefficients."""
        if not callable(h):
            return self.build("p_only", qgrid=qgrid, pgrid=pgrid, coefficients=list(h))
        if qgrid is None or pgrid is None:
            dq, dp = self.default_grids()
            qgrid = qgrid or dq
            pgrid = pgrid or dp
        field_ = sample_hamiltonian(lambda q, p: np.asarray(h(np.asarray(p, dtype=float)), dtype=float)
                                    + 0.0 * np.asarray(q), qgrid, pgrid, name=name)
        self.verify_flags(field_, {"is_p_only": True})
        return field_

    def shear_conjugated(self, name: str, f: Callable[[np.ndarray], np.ndarray],
                         df: Callable[[np.ndarray], np.ndarray], **params) -> HamiltonianField:
        """Preset composed with the vertical shear generated by f (df its derivative)."""
        from .transforms import shear_conjugate

        return shear_conjugate(self.build(name, **params), f, df)


_CATALOG: Optional[PresetCatalog] = None


def get_catalog() -> PresetCatalog:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = PresetCatalog()
    return _CATALOG


def list_presets() -> List[Dict[str, Any]]:
    catalog = get_catalog()
    return [
        {"name": p.name, "description": p.description, "params": p.defaults, "flags": p.claimed_flags}
        for p in (catalog.get(n) for n in catalog.names())
    ]
