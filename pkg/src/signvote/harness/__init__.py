"""Experiment driver, bound-verification suites and output writers."""
from .config import ExperimentConfig, load_config
from .experiment import ExperimentResult, run_experiment
from .output import emit_csv, emit_json
from .verify import SuiteReport, verify_bounds

__all__ = ["ExperimentConfig", "load_config", "ExperimentResult", "run_experiment",
           "emit_csv", "emit_json", "SuiteReport", "verify_bounds"]
