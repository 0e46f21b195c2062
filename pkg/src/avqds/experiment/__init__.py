"""Config-driven experiment runs, comparisons and size sweeps."""

from .config import ConfigError, ExperimentConfig, load_config
from .runner import CompareError, compare_runs, run_experiment, sweep

__all__ = [
    "CompareError",
    "ConfigError",
    "ExperimentConfig",
    "compare_runs",
    "load_config",
    "run_experiment",
    "sweep",
]
