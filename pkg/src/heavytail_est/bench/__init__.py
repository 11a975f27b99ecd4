"""Command-line Monte Carlo harness."""
from .config import ConfigError, Experiment, ExperimentConfig, load_config, parse_config
from .experiments import ExperimentResult, quantile_report, run_experiment, write_csv

__all__ = [
    "ConfigError",
    "Experiment",
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "parse_config",
    "quantile_report",
    "run_experiment",
    "write_csv",
]
