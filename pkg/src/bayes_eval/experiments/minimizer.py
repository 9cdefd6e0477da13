"""Minimizers of the free energy and of leave-one-out over a normal prior hyperparameter."""

from __future__ import annotations

import time

import numpy as np

from ..core import DomainError
from ..zoo.normal import minimize_hyper, normal_exact_fn_cn, normal_fn_cn
from .config import ExperimentConfig, trial_seeds
from .summary import SummaryTable, TrialRecord, summarize
from .trials import kept, run_trials

FORMS = {"closed-form": normal_fn_cn, "normalized": normal_exact_fn_cn}


def minimizer_trial(cfg: ExperimentConfig, index: int, seed: int, group: str) -> TrialRecord:
    (s_data,) = trial_seeds(cfg.seed, index, 0, 1)
    rng = np.random.default_rng(s_data)
    x = float(cfg.truth.get("mean", 0.0)) + float(cfg.truth.get("sd", 1.0)) * rng.standard_normal(cfg.n)
    lo, hi = (cfg.grid or [1e-3, 20.0])[:2]
    fn = FORMS[cfg.truth.get("form", "closed-form")]
    a_f = minimize_hyper(lambda a: fn(x, a)[0], lo, hi)
    a_c = minimize_hyper(lambda a: fn(x, a)[1], lo, hi)
    return TrialRecord(index=index, seed=cfg.seed, group=group,
                       report={"argmin F_n": a_f, "argmin C_n": a_c, "separation": a_c - a_f})


def run_minimizer_study(cfg: ExperimentConfig, return_records: bool = False):
    if cfg.truth.get("form", "closed-form") not in FORMS:
        raise DomainError(f"unknown form {cfg.truth.get('form')!r}; choose from {sorted(FORMS)}")
    start = time.perf_counter()
    records = run_trials(minimizer_trial, [(cfg, i, cfg.seed, "") for i in range(cfg.trials)], cfg.workers)
    ok = kept(records)
    table = summarize([r.report for r in ok], ["argmin F_n", "argmin C_n", "separation"], experiment="minimizer")
    table.excluded = len(records) - len(ok)
    table.stats["min_separation"] = float(min(r.report["separation"] for r in ok))
    table.runtime = time.perf_counter() - start
    return (table, records) if return_records else table
