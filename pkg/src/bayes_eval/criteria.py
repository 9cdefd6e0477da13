"""Estimators of the generalization loss and the free energy.

All per-datum posterior averages are computed from the ``(S, n)`` pointwise
log-likelihood matrix with max-subtracted log-sum-exp.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, DomainError, Model, Truth
from .sampler import PosteriorDraws, SamplerConfig, pointwise_loglik, posterior_functionals, sample_tempered

WEIGHT_SHARE_LIMIT = 0.9


class ImportanceWeightWarning(UserWarning):
    """A single draw dominates an importance-sampling average."""


class OracleNoiseWarning(UserWarning):
    """Too few test points for a reliable generalization-loss estimate."""


def log_mean_exp(a: np.ndarray, axis: int = 0) -> np.ndarray:
    return logsumexp(a, axis=axis) - np.log(a.shape[axis])


def _require_untempered(draws: PosteriorDraws):
    if draws.beta != 1.0:
        raise DomainError("predictive requires untempered posterior (beta = 1)")


def training_loss(draws: PosteriorDraws) -> float:
    """``T_n = -(1/n) sum_i log E_theta[p(X_i|theta)]``."""
    _require_untempered(draws)
    return float(-np.mean(log_mean_exp(draws.loglik)))


@dataclass(frozen=True)
class FunctionalVariance:
    V: float
    per_datum: np.ndarray


def functional_variance(draws: PosteriorDraws) -> FunctionalVariance:
    _, var = posterior_functionals(draws)
    return FunctionalVariance(float(np.sum(var)), var)


def waic(draws: PosteriorDraws) -> float:
    """``W_n = T_n + (1/n) sum_i V_theta[log p(X_i|theta)]``."""
    _require_untempered(draws)
    if draws.S < 2:
        raise DomainError("WAIC needs at least two draws")
    fv = functional_variance(draws)
    return training_loss(draws) + fv.V / draws.n


def loo_is_pointwise(draws: PosteriorDraws):
    """Per-datum importance-sampling LOO terms and the largest normalized weight.

    Returns ``(terms, max_share)`` where ``terms[i] = log E_theta[1/p(X_i|theta)]``,
    so that ``C_n = mean(terms)``.
    """
    _require_untempered(draws)
    neg = -draws.loglik
    terms = log_mean_exp(neg)
    share = np.exp(np.max(neg, axis=0) - logsumexp(neg, axis=0))
    return terms, share


def loo_is(draws: PosteriorDraws) -> float:
    """``C_n`` through the posterior mean of the inverse likelihood."""
    terms, share = loo_is_pointwise(draws)
    heavy = np.flatnonzero(share > WEIGHT_SHARE_LIMIT)
    if heavy.size:
        warnings.warn(
            f"importance weights dominated by one draw for observations {heavy.tolist()[:10]}",
            ImportanceWeightWarning,
            stacklevel=2,
        )
    return float(np.mean(terms))


def loo_exact(model: Model, data: Dataset, cfg: SamplerConfig) -> float:
    """Brute-force LOO: one posterior per left-out point; seeds derive from ``(cfg.seed, i)``."""
    return float(-np.mean(loo_exact_pointwise(model, data, cfg)))


def loo_exact_pointwise(model: Model, data: Dataset, cfg: SamplerConfig) -> np.ndarray:
    if data.n < 2:
        raise DomainError("leave-one-out needs n >= 2")
    base = np.random.SeedSequence(cfg.seed)
    out = np.empty(data.n)
    for i in range(data.n):
        seed = int(np.random.SeedSequence(base.entropy, spawn_key=(10_000 + i,)).generate_state(1)[0])
        try:
            draws = sample_tempered(model, data.without(i), cfg.replace(beta=1.0, seed=seed))
        except Exception as exc:
            raise type(exc)(f"left-out index {i}: {exc}") from exc
        ll = pointwise_loglik(model, draws.theta, data.items[i : i + 1])
        out[i] = log_mean_exp(ll)[0]
    return out


def holdout(draws: PosteriorDraws, second: Dataset, model: Model) -> float:
    """``H_{n2}``: predictive loss on the second split of a posterior fitted on the first."""
    _require_untempered(draws)
    if second.n == 0:
        raise DomainError("empty hold-out split")
    ll = pointwise_loglik(model, draws.theta, second.items)
    return float(-np.mean(log_mean_exp(ll)))


def acv(C_n1: float, H_n2: float, n1: int, n2: int) -> float:
    """Adjusted cross validation ``(n1/n) C_{n1} + (n2/n) H_{n2}``."""
    if n1 < 1 or n2 < 1:
        raise DomainError("both splits must be nonempty")
    n = n1 + n2
    return n1 / n * C_n1 + n2 / n * H_n2


def log_predictive(draws: PosteriorDraws, model: Model, items: np.ndarray, chunk: int = 256) -> np.ndarray:
    """``log p(x|X^n)`` for each row of ``items``."""
    out = np.empty(len(items))
    for start in range(0, len(items), chunk):
        ll = pointwise_loglik(model, draws.theta, items[start : start + chunk])
        out[start : start + chunk] = log_mean_exp(ll)
    return out


def gen_loss(
    draws: PosteriorDraws,
    model: Model,
    truth: Truth,
    m: int,
    rng: np.random.Generator,
    design: str = "random",
    x_inputs: Optional[np.ndarray] = None,
) -> float:
    """Monte Carlo generalization loss with ``m`` fresh truth samples.

    When the truth entropy is known the estimate is ``S + mean(log q - log p)``,
    which has far lower variance than ``-mean(log p)``. The fixed design
    cycles the training inputs ``x_inputs`` and draws fresh responses.
    """
    _require_untempered(draws)
    if m < 100:
        warnings.warn(f"only {m} test points for the generalization loss", OracleNoiseWarning, stacklevel=2)
    if design == "random":
        test = truth.sample(m, rng).items
    elif design == "fixed":
        if x_inputs is None or truth.conditional is None:
            raise DomainError("fixed design needs training inputs and a conditional truth")
        xs = np.resize(np.asarray(x_inputs, dtype=float), m)
        test = truth.conditional(xs, rng)
    else:
        raise DomainError(f"unknown design {design!r}")
    logp = log_predictive(draws, model, test)
    if truth.entropy is not None:
        logq = truth.log_density(test)
        return float(truth.entropy + np.mean(logq - logp))
    return float(-np.mean(logp))


def plugin_criteria(mle_loss: float, d_eff: int, rlct, n: int, rlct_hat=None) -> dict:
    """AIC (per-sample scale), BIC, AFE and sBIC (total scale) from the MLE loss."""
    if not np.isfinite(mle_loss):
        raise DomainError("non-finite maximum-likelihood loss")
    if n < 2:
        raise DomainError("need n >= 2")
    lam = getattr(rlct, "lambda_", rlct)
    lam_hat = lam if rlct_hat is None else getattr(rlct_hat, "lambda_", rlct_hat)
    total = n * mle_loss
    logn = np.log(n)
    return {
        "AIC": mle_loss + d_eff / n,
        "BIC": total + 0.5 * d_eff * logn,
        "AFE": total + lam * logn,
        "sBIC": total + lam_hat * logn,
    }


def dic(draws: PosteriorDraws, model: Model, data: Dataset) -> float:
    """Per-sample DIC ``2 E_theta[L_n(theta)] - L_n(theta_bar)``; ``theta_bar`` is the flat posterior mean."""
    _require_untempered(draws)
    if draws.S < 2:
        raise DomainError("DIC needs at least two draws")
    e_loss = float(-np.mean(draws.loglik))
    theta_bar = draws.theta.mean(axis=0)
    plug = float(-np.mean(model.log_density(data.items, theta_bar)))
    return 2.0 * e_loss - plug


def wbic_from_draws(draws: PosteriorDraws) -> float:
    """Tempered posterior mean of ``n L_n(theta)``."""
    return float(-np.mean(np.sum(draws.loglik, axis=1)))


def wbic(model: Model, data: Dataset, cfg: SamplerConfig) -> float:
    """WBIC at ``beta = 1/log n``, computed from the supplied ``n``."""
    if data.n < 3:
        raise DomainError("WBIC needs n >= 3")
    draws = sample_tempered(model, data, cfg.replace(beta=1.0 / np.log(data.n)))
    return wbic_from_draws(draws)


def default_beta_grid(n: int, points: int = 21) -> np.ndarray:
    return np.geomspace(1.0 / (10.0 * np.log(max(n, 3))), 1.0, points)


def ti_free_energy(
    model: Model,
    data: Dataset,
    cfg: SamplerConfig,
    beta_grid: Optional[np.ndarray] = None,
    prior_draws: int = 20_000,
) -> float:
    """Thermodynamic integration ``F_n = int_0^1 E^beta[n L_n] d beta``.

    The ``beta = 0`` endpoint is the prior mean of ``n L_n``, estimated from
    independent prior draws; interior points come from tempered runs with
    seeds derived from ``(cfg.seed, grid index)``.
    """
    if not model.proper_prior:
        raise DomainError("free energy undefined / may be made infinite for an improper prior")
    grid = default_beta_grid(data.n) if beta_grid is None else np.asarray(beta_grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] > 1:
        raise DomainError("beta grid must be strictly increasing in (0, 1]")
    lik = model.bind(data)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
    values = [float(-np.mean(lik.logp(model.sample_prior(rng, prior_draws))))]
    for k, beta in enumerate(grid):
        seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(k,)).generate_state(1)[0])
        draws = sample_tempered(model, data, cfg.replace(beta=float(beta), seed=seed))
        values.append(float(-np.mean(lik.logp(draws.theta))))
    betas = np.concatenate([[0.0], grid])
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(values, betas))


def batch_standard_error(draws: PosteriorDraws, statistic: Callable[[PosteriorDraws], float], batches: int = 20) -> float:
    """Monte Carlo standard error of ``statistic`` by batch means over contiguous draw blocks.

    Blocks never straddle chains when ``batches`` is a multiple of the chain count.
    """
    S = draws.S
    size = S // batches
    vals = [statistic(draws.subset(np.arange(b * size, (b + 1) * size))) for b in range(batches)]
    return float(np.std(vals, ddof=1) / np.sqrt(batches))


# error forms: name -> (ingredient, entropy to subtract, scale)
_ERROR_FORMS = {
    "GE.E.": ("G_n", "S"),
    "LOO.E.": ("C_n", "S_n"),
    "WAIC.E.": ("W_n", "S_n"),
    "AC.E.": ("A_n", "S_n"),
    "HO.E.": ("H_n2", "S_n2"),
    "AIC.E.": ("AIC", "S_n"),
    "DIC.E.": ("DIC", "S_n"),
    "AFE/n-S_n": ("AFE", "S_n"),
    "BIC/n-S_n": ("BIC", "S_n"),
    "WBIC/n-S_n": ("WBIC", "S_n"),
    "sBIC/n-S_n": ("sBIC", "S_n"),
}
_TOTAL_SCALE = {"BIC", "WBIC", "AFE", "sBIC", "F_TI"}


@dataclass
class EvalReport:
    """Criterion values and their entropy-reduced error forms."""

    n: int
    n1: Optional[int] = None
    n2: Optional[int] = None
    T_n: Optional[float] = None
    W_n: Optional[float] = None
    C_n: Optional[float] = None
    H_n2: Optional[float] = None
    A_n: Optional[float] = None
    G_n: Optional[float] = None
    AIC: Optional[float] = None
    DIC: Optional[float] = None
    BIC: Optional[float] = None
    WBIC: Optional[float] = None
    AFE: Optional[float] = None
    sBIC: Optional[float] = None
    F_TI: Optional[float] = None
    F_n: Optional[float] = None
    S_n: Optional[float] = None
    S_n2: Optional[float] = None
    S: Optional[float] = None
    errors: dict = field(default_factory=dict)

    def per_sample(self, key: str) -> Optional[float]:
        v = getattr(self, key)
        if v is None:
            return None
        return v / self.n if key in _TOTAL_SCALE else v

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "errors" or v is None:
                continue
            out[f.name] = v
            if f.name in _TOTAL_SCALE:
                out[f.name + "/n"] = v / self.n
        out.update(self.errors)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def error_report(values: dict, S_n: float, S: Optional[float] = None, S_n2: Optional[float] = None,
                 n: Optional[int] = None, n1: Optional[int] = None, n2: Optional[int] = None,
                 requested=None) -> EvalReport:
    """Fill an :class:`EvalReport` and every error form whose ingredients are present.

    Split-based forms are rescaled by ``n1/n``. Names in ``requested`` whose
    ingredients are missing raise :class:`DomainError`.
    """
    if n is None:
        raise DomainError("sample size n is required")
    report = EvalReport(n=n, n1=n1, n2=n2, S_n=S_n, S=S, S_n2=S_n2)
    for k, v in values.items():
        if not hasattr(report, k) or k == "errors":
            raise DomainError(f"unknown criterion {k!r}")
        setattr(report, k, None if v is None else float(v))
    requested = set(requested or ())
    unknown = requested - set(_ERROR_FORMS)
    if unknown:
        raise DomainError(f"unknown error forms {sorted(unknown)}")
    for name, (key, ent) in _ERROR_FORMS.items():
        value = report.per_sample(key)
        entropy = getattr(report, ent)
        split = name in ("AC.E.", "HO.E.")
        missing = [x for x, v in ((key, value), (ent, entropy)) if v is None]
        if split and n1 is None:
            missing.append("n1")
        if missing:
            if name in requested:
                raise DomainError(f"error form {name} needs {', '.join(missing)}")
            continue
        err = value - entropy
        if split:
            err *= n1 / n
        report.errors[name] = err
    return report
