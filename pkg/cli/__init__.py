# Experiment runner: configs, orchestration, result diffs and reports

from .config_manager import EXPERIMENT_SCHEMA, ExperimentConfig, Settings, load_config, load_presets_yaml, load_settings
from .results import DiffTable, ResultRecord, diff
from .runner import EXIT_ERROR, EXIT_OK, EXIT_PROPERTY_FAILURE, ExperimentRun, check, run

__all__ = [
    "EXPERIMENT_SCHEMA", "ExperimentConfig", "Settings", "load_config", "load_presets_yaml", "load_settings",
    "DiffTable", "ResultRecord", "diff", "EXIT_ERROR", "EXIT_OK", "EXIT_PROPERTY_FAILURE", "ExperimentRun",
    "check", "run",
]
