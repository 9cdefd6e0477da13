"""Matrix-factorization studies: estimator errors of the generalization loss and free-energy criteria."""

from __future__ import annotations

import time

import numpy as np

from .. import criteria as cr
from ..core import DomainError, empirical_entropy
from ..rlct import rlct_reduced_rank
from ..sampler import sample_tempered
from ..zoo.matrix_factorization import mf_mle, mf_truth
from .config import ExperimentConfig, trial_seeds
from .summary import BASELINE, SummaryTable, TrialRecord, merge, summarize
from .trials import draw_diagnostics, kept, run_trials

ERROR_QUANTITIES = ["GE.E.", "LOO.E.", "WAIC.E.", "AC.E.", "HO.E.", "AIC.E.", "DIC.E."]
FREE_ENERGY_QUANTITIES = ["AFE/n-S_n", "BIC/n-S_n", "WBIC/n-S_n"]


def _settings(cfg: ExperimentConfig) -> list[int]:
    m = cfg.model
    if m.get("model") not in ("matrix_factorization", "matrix-factorization"):
        raise DomainError("this experiment needs the matrix_factorization model")
    H = m.get("H", 2)
    return [int(h) for h in (H if isinstance(H, (list, tuple)) else [H])]


def _truth(cfg: ExperimentConfig, H: int):
    m = cfg.model
    return mf_truth(int(m["M"]), int(m["N"]), cfg.truth["diag"], H=H,
                    rho=float(m.get("rho", 10.0)), mu=float(m.get("mu", 10.0)))


def _true_rank(cfg: ExperimentConfig) -> int:
    return int(np.count_nonzero(cfg.truth["diag"]))


def _free_energy_terms(cfg, model, data, H, seed):
    lam = rlct_reduced_rank(model.M, model.N, H, _true_rank(cfg))
    _, mle_loss = mf_mle(model, data)
    plug = cr.plugin_criteria(mle_loss, model.effective_dim, lam, data.n)
    wdraws = sample_tempered(model, data, cfg.sampler_config(seed, beta=1.0 / np.log(data.n)))
    return {"AIC": plug["AIC"], "BIC": plug["BIC"], "AFE": plug["AFE"],
            "WBIC": cr.wbic_from_draws(wdraws)}, wdraws


def mf_trial(cfg: ExperimentConfig, H: int, full: bool, index: int, seed: int, group: str) -> TrialRecord:
    """One simulated dataset. ``full`` adds every generalization-loss estimator to the free-energy terms."""
    s_data, s_post, s_post1, s_wbic, s_test = trial_seeds(cfg.seed, index, H, 5)
    truth = _truth(cfg, H)
    model = truth.model
    data = truth.sample(cfg.n, np.random.default_rng(s_data))
    S_n = empirical_entropy(truth, data)
    values, wdraws = _free_energy_terms(cfg, model, data, H, s_wbic)
    diag = draw_diagnostics(wdraws, "wbic")
    kwargs = {}
    if full:
        n1, n2 = cfg.split
        first, second = data.split(n1)
        draws = sample_tempered(model, data, cfg.sampler_config(s_post))
        draws1 = sample_tempered(model, first, cfg.sampler_config(s_post1))
        C_n, share = cr.loo_is_pointwise(draws)
        C_n1 = float(np.mean(cr.loo_is_pointwise(draws1)[0]))
        H_n2 = cr.holdout(draws1, second, model)
        values.update(
            T_n=cr.training_loss(draws),
            W_n=cr.waic(draws),
            C_n=float(np.mean(C_n)),
            H_n2=H_n2,
            A_n=cr.acv(C_n1, H_n2, n1, n2),
            G_n=cr.gen_loss(draws, model, truth, cfg.test_size, np.random.default_rng(s_test)),
            DIC=cr.dic(draws, model, data),
        )
        diag.update(draw_diagnostics(draws, "post"), **draw_diagnostics(draws1, "post1"))
        diag["max_weight_share"] = float(np.max(share))
        kwargs = dict(S=truth.entropy, S_n2=empirical_entropy(truth, second), n1=n1, n2=n2)
    report = cr.error_report(values, S_n, n=cfg.n, **kwargs)
    return TrialRecord(index=index, seed=cfg.seed, group=group, report=report.to_dict(), diagnostics=diag)


def _run(cfg: ExperimentConfig, full: bool) -> dict:
    out = {}
    for H in _settings(cfg):
        group = f"H={H}"
        payloads = [(cfg, H, full, i, cfg.seed, group) for i in range(cfg.trials)]
        out[H] = run_trials(mf_trial, payloads, cfg.workers)
    return out


def rlct_for(cfg: ExperimentConfig, H: int) -> float:
    return rlct_reduced_rank(int(cfg.model["M"]), int(cfg.model["N"]), H, _true_rank(cfg)).lambda_


def inverse_correlation(records, lam: float, n: int) -> dict:
    """Correlation of ``G_n - L_0`` with ``C_n - L_{0,n}`` and the mean of their sum against ``2 lambda / n``."""
    g = np.array([r["GE.E."] for r in records])
    c = np.array([r["LOO.E."] for r in records])
    w = np.array([r["WAIC.E."] for r in records])
    return {
        "corr": float(np.corrcoef(g, c)[0, 1]),
        "mean_sum": float(np.mean(g + c)),
        "target_2lambda_over_n": 2.0 * lam / n,
        "loo_waic_close_rate": float(np.mean(np.abs(c - w) < 0.01)),
    }


def error_summary(cfg: ExperimentConfig, H: int, records) -> SummaryTable:
    group = f"H={H}"
    ok = [r.report for r in kept(records)]
    t = summarize(ok, ERROR_QUANTITIES, reading=BASELINE, group=group, experiment="example1")
    t.excluded = len(records) - len(ok)
    for k, v in inverse_correlation(ok, rlct_for(cfg, H), cfg.n).items():
        t.stats[f"{group} {k}"] = v
    return t


def free_energy_summary(cfg: ExperimentConfig, H: int, records) -> SummaryTable:
    group = f"H={H}"
    ok = [r.report for r in kept(records)]
    t = summarize(ok, FREE_ENERGY_QUANTITIES, group=group, experiment="example2")
    t.excluded = len(records) - len(ok)
    afe = np.array([r["AFE"] for r in ok])
    bic = np.array([r["BIC"] for r in ok])
    wb = np.array([r["WBIC"] for r in ok])
    t.stats[f"{group} wbic_closer_rate"] = float(np.mean(np.abs(wb - afe) < np.abs(bic - afe)))
    return t


def run_example1(cfg: ExperimentConfig, return_records: bool = False):
    start = time.perf_counter()
    runs = _run(cfg, full=True)
    table = merge("example1", [error_summary(cfg, H, recs) for H, recs in runs.items()])
    table.runtime = time.perf_counter() - start
    if return_records:
        return table, [r for recs in runs.values() for r in recs]
    return table


def run_example2(cfg: ExperimentConfig, return_records: bool = False):
    start = time.perf_counter()
    runs = _run(cfg, full=False)
    table = merge("example2", [free_energy_summary(cfg, H, recs) for H, recs in runs.items()])
    table.runtime = time.perf_counter() - start
    if return_records:
        return table, [r for recs in runs.values() for r in recs]
    return table
