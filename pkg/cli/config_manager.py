from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import os, yaml
from dotenv import load_dotenv
from jsonschema import Draft7Validator

from shared.constants import DEFAULT_TAU, ENV_OUT, ENV_THREADS, ENV_TOLERANCE_SCALE
from shared.errors import ConfigInvalid
from shared.utils import config_hash

load_dotenv()
CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"

OPERATIONS = ("curves", "c_pm", "properties", "experiment", "longtime")
BACKEND_CHOICES = ("auto", "minmax", "weakkam", "levelset", "exact_p_only")
INITIAL_DATA = ("zero", "cosine", "sine")
RUN_ENVIRONMENT = ("output_dir", "threads")

_number = {"type": "number"}
_positive_int = {"type": "integer", "minimum": 1}

EXPERIMENT_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["name", "preset", "operations"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "preset": {"type": "string", "minLength": 1},
        "preset_params": {"type": "object"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_q": _positive_int,
                "p_min": _number,
                "p_max": _number,
                "n_p": {"type": "integer", "minimum": 2},
                "interpolation": {"enum": ["bilinear", "bicubic"]},
            },
        },
        "curve_grid": {
            "type": "object",
            "required": ["p_min", "p_max", "n_nodes"],
            "additionalProperties": False,
            "properties": {"p_min": _number, "p_max": _number, "n_nodes": {"type": "integer", "minimum": 2}},
        },
        "backends": {"type": "array", "minItems": 1, "items": {"enum": list(BACKEND_CHOICES)}},
        "k_list": {"type": "array", "minItems": 1, "items": _positive_int},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "operations": {"type": "array", "minItems": 1, "items": {"enum": list(OPERATIONS)}},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "tolerance_scale": {"type": "number", "exclusiveMinimum": 0},
        "threads": _positive_int,
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{name: {"type": "object"} for name in BACKEND_CHOICES},
                "properties": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "suite": {"type": "array", "items": {"type": "string"}},
                        "p0": _number,
                        "trials": {"type": "integer", "minimum": 0},
                        "k_max": _positive_int,
                        "shift": _number,
                    },
                },
                "experiment": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "t": {"type": "number", "exclusiveMinimum": 0},
                        "n_times": _positive_int,
                        "initial": {"enum": list(INITIAL_DATA)},
                        "amplitude": _number,
                    },
                },
                "diff": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"tolerance": {"type": "number", "exclusiveMinimum": 0}},
                },
            },
        },
    },
}

_VALIDATOR = Draft7Validator(EXPERIMENT_SCHEMA)


@dataclass
class Settings:
    output_dir: str = "results"
    threads: int = 1
    tolerance_scale: float = 1.0
    log_level: str = "INFO"


def load_settings() -> Settings:
    try:
        return Settings(
            output_dir=os.getenv(ENV_OUT, "results").strip() or "results",
            threads=int(os.getenv(ENV_THREADS, "1")),
            tolerance_scale=float(os.getenv(ENV_TOLERANCE_SCALE, "1.0")),
            log_level=os.getenv("EFFHAM_LOG_LEVEL", "INFO").upper(),
        )
    except ValueError as e:
        raise ConfigInvalid(f"environment: {e}") from e


@dataclass
class ExperimentConfig:
    name: str
    preset: str
    operations: List[str]
    preset_params: Dict[str, Any] = field(default_factory=dict)
    grid: Dict[str, Any] = field(default_factory=dict)
    curve_grid: Optional[Dict[str, Any]] = None
    backends: List[str] = field(default_factory=lambda: ["auto"])
    k_list: List[int] = field(default_factory=lambda: [1, 2])
    tau: float = DEFAULT_TAU
    seed: int = 0
    output_dir: str = "results"
    tolerance_scale: float = 1.0
    threads: int = 1
    params: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        validate_config(data)
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of every field that affects the numbers."""
        payload = {k: v for k, v in self.as_dict().items() if k not in RUN_ENVIRONMENT}
        return config_hash(payload)

    def backend_params(self, backend: str) -> Dict[str, Any]:
        return dict(self.params.get(backend, {}))

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.params.get(name, {}))

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.name


def validate_config(data: Any) -> None:
    """Raise ConfigInvalid for the first schema violation, ordered by path."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: [str(part) for part in e.absolute_path])
    if errors:
        first = errors[0]
        raise ConfigInvalid(f"{first.json_path}: {first.message}")


def load_config(path: Union[str, Path], seed: Optional[int] = None, out: Optional[str] = None,
                threads: Optional[int] = None, tolerance_scale: Optional[float] = None) -> ExperimentConfig:
    """
    Read an experiment YAML, validate it and apply command-line overrides.

    EFFHAM_OUT replaces the output directory when out is not given.

    Raises:
        ConfigInvalid: unreadable YAML or a schema violation
        FileNotFoundError: no such config
    """
    path = Path(path)
    if not path.exists() and not path.is_absolute() and (CONFIGS_DIR / path).exists():
        path = CONFIGS_DIR / path
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigInvalid(f"$: not valid YAML ({e})") from e
    if data is None:
        data = {}

    config = ExperimentConfig.from_dict(data)
    settings = load_settings()
    if seed is not None:
        config.seed = int(seed)
    if out is not None:
        config.output_dir = str(out)
    elif os.getenv(ENV_OUT):
        config.output_dir = settings.output_dir
    if threads is not None:
        config.threads = int(threads)
    elif "threads" not in data:
        config.threads = settings.threads
    if tolerance_scale is not None:
        config.tolerance_scale = float(tolerance_scale)
    elif "tolerance_scale" not in data:
        config.tolerance_scale = settings.tolerance_scale
    return config


def load_presets_yaml():
    with open(CONFIGS_DIR / "presets.yaml", "r", encoding="utf-8") as f:
        return yaml.safe_load(f)
