"""Regular-model studies: Fisher matrices and the variance of split cross validations.

The three estimators compared are ``C_n - L_{0,n}``, ``(1/2)(A_n - L_{0,n})`` and
``(1/8)(A_{n/2} + A'_{n/2} - 2 L_{0,n})``, where ``A_n`` uses ``n1 = n2 = n/2``
and ``A_{n/2}``, ``A'_{n/2}`` are the same estimator on each half of the sample.
All three share the mean ``tr(I J^{-1}) / (2n)`` to first order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..core import Dataset, DomainError, Model, Truth, empirical_log_loss
from ..zoo.normal import NormalLocation, normal_truth
from ..zoo.polyreg import PolyRegression, PolyRegressionExact, polyreg_truth
from .config import ExperimentConfig, trial_seeds
from .summary import SummaryTable, TrialRecord, summarize
from .trials import kept, run_trials

QUANTITIES = ["C_n-L0n", "(A_n-L0n)/2", "(A+A'-2L0n)/8"]


@dataclass(frozen=True)
class FisherResult:
    I: np.ndarray
    J: np.ndarray
    trace: float
    trace_sq: float


def _scores(model: Model, theta0: np.ndarray, items: np.ndarray) -> np.ndarray:
    if hasattr(model, "score"):
        return np.asarray(model.score(theta0, items), dtype=float).reshape(len(items), -1)
    d = theta0.size
    out = np.empty((len(items), d))
    for j in range(d):
        h = 1e-4 * max(abs(theta0[j]), 1.0)
        e = np.zeros(d)
        e[j] = h
        out[:, j] = (model.log_density(items, theta0 + e) - model.log_density(items, theta0 - e)) / (2 * h)
    return out


def fisher_matrices(model: Model, truth: Truth, theta0, m: int, rng: np.random.Generator,
                    tol: float = 1e-8) -> FisherResult:
    """``I`` from the score outer product over ``m`` truth samples; ``J`` by central differences.

    ``J`` differentiates the sample mean score when the model exposes one,
    otherwise it is the second difference of ``L`` itself; steps are ``1e-4``
    relative to each coordinate.
    """
    theta0 = np.asarray(theta0, dtype=float)
    items = truth.sample(m, rng).items
    g = _scores(model, theta0, items)
    I = g.T @ g / m
    d = theta0.size
    steps = 1e-4 * np.maximum(np.abs(theta0), 1.0)
    J = np.empty((d, d))
    if hasattr(model, "score"):
        for j in range(d):
            e = np.zeros(d)
            e[j] = steps[j]
            up = _scores(model, theta0 + e, items).mean(axis=0)
            dn = _scores(model, theta0 - e, items).mean(axis=0)
            J[:, j] = -(up - dn) / (2 * steps[j])
    else:
        def L(t):
            return -float(np.mean(model.log_density(items, t)))

        for j in range(d):
            for k in range(d):
                ej, ek = np.zeros(d), np.zeros(d)
                ej[j], ek[k] = steps[j], steps[k]
                J[j, k] = (L(theta0 + ej + ek) - L(theta0 + ej - ek) - L(theta0 - ej + ek)
                           + L(theta0 - ej - ek)) / (4 * steps[j] * steps[k])
    J = 0.5 * (J + J.T)
    eig = np.linalg.eigvalsh(J)
    if eig[0] <= tol * max(abs(eig[-1]), 1.0):
        raise DomainError("not regular at θ_0")
    M = I @ np.linalg.inv(J)
    return FisherResult(I, J, float(np.trace(M)), float(np.trace(M @ M)))


class _ExactLOO:
    """Closed-form LOO and hold-out losses for the conjugate regular models."""

    def __init__(self, model: Model):
        if not isinstance(model, (PolyRegression, NormalLocation)):
            raise DomainError("the variance study needs a conjugate regular model")
        if not model.proper_prior:
            raise DomainError("the variance study needs a proper prior")
        self.model = model

    def loo(self, data: Dataset) -> float:
        if isinstance(self.model, PolyRegression):
            return PolyRegressionExact(self.model, data).loo()
        x = data.items.reshape(-1)
        m = self.model
        prec = m.tau0 + m.tau * (x.size - 1)
        mean = (m.tau0 * m.m0 + m.tau * (x.sum() - x)) / prec
        return float(-np.mean(norm.logpdf(x, mean, np.sqrt(1 / prec + 1 / m.tau))))

    def holdout(self, first: Dataset, second: Dataset) -> float:
        if isinstance(self.model, PolyRegression):
            return PolyRegressionExact(self.model, first).holdout(second)
        mean, prec = self.model.posterior(first)
        x = second.items.reshape(-1)
        return float(-np.mean(norm.logpdf(x, mean, np.sqrt(1 / prec + 1 / self.model.tau))))

    def acv(self, data: Dataset) -> float:
        n1 = data.n // 2
        first, second = data.split(n1)
        return (n1 * self.loo(first) + second.n * self.holdout(first, second)) / data.n


def _setup(cfg: ExperimentConfig):
    m = dict(cfg.model)
    name = m.pop("model", None)
    t = cfg.truth
    if name in ("polynomial_regression", "polyreg", "polynomial-regression"):
        model = PolyRegression(**m)
        a0 = np.asarray(t["a0"], dtype=float)
        if a0.size != model.K:
            raise DomainError(f"truth has {a0.size} coefficients, model has K={model.K}")
        truth = polyreg_truth(a0, float(t["s0"]))
        return model, truth, truth.theta0
    if name == "normal_location":
        model = NormalLocation(**m)
        truth = normal_truth(float(t.get("mean", 0.0)), float(t.get("sd", 1.0)))
        return model, truth, np.array([float(t.get("mean", 0.0))])
    raise DomainError(f"model {name!r} is not supported by the variance study")


def variance_trial(cfg: ExperimentConfig, index: int, seed: int, group: str) -> TrialRecord:
    (s_data,) = trial_seeds(cfg.seed, index, 0, 1)
    model, truth, theta0 = _setup(cfg)
    exact = _ExactLOO(model)
    data = truth.sample(cfg.n, np.random.default_rng(s_data))
    L0n = empirical_log_loss(model, data, theta0)
    h1, h2 = data.split(cfg.n // 2)
    report = {
        QUANTITIES[0]: exact.loo(data) - L0n,
        QUANTITIES[1]: 0.5 * (exact.acv(data) - L0n),
        QUANTITIES[2]: (exact.acv(h1) + exact.acv(h2) - 2.0 * L0n) / 8.0,
    }
    return TrialRecord(index=index, seed=cfg.seed, group=group, report=report)


def run_variance_study(cfg: ExperimentConfig, return_records: bool = False):
    if cfg.n % 4:
        raise DomainError("n must be divisible by 4")
    start = time.perf_counter()
    model, truth, theta0 = _setup(cfg)
    _ExactLOO(model)
    records = run_trials(variance_trial, [(cfg, i, cfg.seed, "") for i in range(cfg.trials)], cfg.workers)
    ok = kept(records)
    table = summarize([r.report for r in ok], QUANTITIES, experiment="variance")
    table.excluded = len(records) - len(ok)
    (s_fisher,) = trial_seeds(cfg.seed, 0, 1, 1)
    fisher = fisher_matrices(model, truth, theta0, int(cfg.truth.get("fisher_samples", 200_000)),
                             np.random.default_rng(s_fisher))
    var = [table.row(q).std ** 2 for q in QUANTITIES]
    k = len(ok)
    table.stats.update({
        "tr(IJ^-1)": fisher.trace,
        "tr((IJ^-1)^2)": fisher.trace_sq,
        "target_mean": fisher.trace / (2 * cfg.n),
        "variance_ratio_second_first": var[1] / var[0],
        "variance_ratio_third_first": var[2] / var[0],
        "standard_errors": [float(np.sqrt(v / k)) for v in var],
    })
    table.runtime = time.perf_counter() - start
    return (table, records) if return_records else table
