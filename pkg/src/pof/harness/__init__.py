"""Configuration, experiment drivers and the command-line interface."""

from .config import ConfigError, ExperimentConfig, TuneSpec, load_config, params_from_json
from .experiments import (SWEEP_KINDS, fit_dcorr, run_tuning, simulate, sweep, trace_apen,
                          verify_traces)

__all__ = [
    "ConfigError", "ExperimentConfig", "SWEEP_KINDS", "TuneSpec", "fit_dcorr", "load_config",
    "params_from_json", "run_tuning", "simulate", "sweep", "trace_apen", "verify_traces",
]
