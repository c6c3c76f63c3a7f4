"""Sweep orchestration, key-rate arithmetic, reports and the command line."""

from .config import ExperimentConfig, load_config
from .experiment import (
    CSV_HEADER,
    KeyRateReport,
    eve_position_sweep,
    format_csv,
    key_rate,
    run_experiment,
    simulate_powers,
    to_bps,
    to_bps_hz,
)

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "KeyRateReport",
    "eve_position_sweep",
    "format_csv",
    "key_rate",
    "load_config",
    "run_experiment",
    "simulate_powers",
    "to_bps",
    "to_bps_hz",
]
