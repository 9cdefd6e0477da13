"""Simulation studies built on the criteria, sampler and model zoo."""

from .config import ConfigError, ExperimentConfig, default_config, load_config, trial_seeds
from .hyper import run_example3
from .mf import run_example1, run_example2
from .minimizer import run_minimizer_study
from .regular import FisherResult, fisher_matrices, run_variance_study
from .runner import RUNNERS, run_experiment, write_outputs
from .summary import SummaryRow, SummaryTable, TrialRecord, summarize
from .trials import DiagnosticWarning, ExperimentError

__all__ = [
    "ConfigError", "ExperimentConfig", "default_config", "load_config", "trial_seeds",
    "run_example1", "run_example2", "run_example3", "run_minimizer_study", "run_variance_study",
    "FisherResult", "fisher_matrices", "RUNNERS", "run_experiment", "write_outputs",
    "SummaryRow", "SummaryTable", "TrialRecord", "summarize",
    "DiagnosticWarning", "ExperimentError",
]
