"""Estimators of Bayesian generalization loss and free energy for possibly singular models."""

from .core import Dataset, DomainError, Model, Truth, empirical_entropy, empirical_log_loss
from .criteria import (
    EvalReport,
    acv,
    dic,
    error_report,
    functional_variance,
    gen_loss,
    holdout,
    loo_exact,
    loo_is,
    plugin_criteria,
    ti_free_energy,
    training_loss,
    waic,
    wbic,
)
from .rlct import RLCTSpec, rlct_reduced_rank, rlct_regular, rlct_volume_estimate
from .sampler import PosteriorDraws, SamplerConfig, SamplerError, sample_tempered

__all__ = [
    "Dataset", "DomainError", "Model", "Truth", "empirical_entropy", "empirical_log_loss",
    "EvalReport", "acv", "dic", "error_report", "functional_variance", "gen_loss", "holdout",
    "loo_exact", "loo_is", "plugin_criteria", "ti_free_energy", "training_loss", "waic", "wbic",
    "RLCTSpec", "rlct_reduced_rank", "rlct_regular", "rlct_volume_estimate",
    "PosteriorDraws", "SamplerConfig", "SamplerError", "sample_tempered",
]
