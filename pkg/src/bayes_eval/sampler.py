"""Tempered posterior sampling.

Draws from ``p_beta(theta|x^n) ∝ pi(theta) prod_i p(X_i|theta)^beta`` with an
adaptive Metropolis kernel (random walk, or Langevin when the model supplies
gradients) and returns the pointwise log-likelihood matrix consumed by the
criteria.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DomainError, Model
from .diagnostics import ess, rhat

RANDOM_WALK = "random-walk"
LANGEVIN = "gradient-assisted"
GIBBS = "gibbs"

_BLOCK = 256


class SamplerError(RuntimeError):
    """The Markov chain could not be started or got stuck."""


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    burn_in: int = 5000
    draws_per_chain: int = 2000
    thinning: int = 1
    beta: float = 1.0
    proposal: str = RANDOM_WALK
    target_acceptance: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1 or self.draws_per_chain < 1 or self.thinning < 1:
            raise DomainError("chains, draws_per_chain and thinning must be >= 1")
        if self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")
        if not self.beta > 0:
            raise DomainError("inverse temperature must be positive")
        if self.proposal not in (RANDOM_WALK, LANGEVIN, GIBBS):
            raise DomainError(f"unknown proposal {self.proposal!r}")

    @property
    def acceptance_goal(self) -> float:
        if self.target_acceptance is not None:
            return self.target_acceptance
        return 0.574 if self.proposal == LANGEVIN else 0.234

    def replace(self, **changes) -> "SamplerConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained draws at inverse temperature ``beta``.

    ``theta`` is ``(S, d)`` and ``loglik[s, i] = log p(X_i|theta_s)`` is
    ``(S, n)``; rows are grouped by chain in chain order.
    """

    theta: np.ndarray
    loglik: np.ndarray
    beta: float
    chains: int
    rhat: np.ndarray
    ess: np.ndarray
    acceptance_rate: np.ndarray
    step_size: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.loglik.shape[1]

    @property
    def S(self) -> int:
        return self.loglik.shape[0]

    def by_chain(self, values: np.ndarray) -> np.ndarray:
        return values.reshape((self.chains, -1) + values.shape[1:])

    def subset(self, rows: np.ndarray) -> "PosteriorDraws":
        """Draws restricted to ``rows``; diagnostics are carried over unchanged."""
        return PosteriorDraws(
            self.theta[rows], self.loglik[rows], self.beta, 1, self.rhat, self.ess,
            self.acceptance_rate, self.step_size,
        )

    def write_csv(self, path, diagnostics_path=None) -> None:
        """Dump draws as CSV (``theta_0..theta_{d-1}``) plus a diagnostics JSON sidecar."""
        d = self.theta.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"theta_{j}" for j in range(d)])
            for row in self.theta:
                w.writerow([repr(float(v)) for v in row])
        if diagnostics_path is None:
            diagnostics_path = str(path) + ".diagnostics.json"
        with open(diagnostics_path, "w") as fh:
            json.dump(
                {
                    "beta": self.beta,
                    "chains": self.chains,
                    "rhat": self.rhat.tolist(),
                    "ess": self.ess.tolist(),
                    "acceptance_rate": self.acceptance_rate.tolist(),
                },
                fh,
                indent=2,
            )


def chain_rngs(seed: int, chains: int) -> list[np.random.Generator]:
    """Independent generator per chain, derived from ``(seed, chain index)``."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,))) for c in range(chains)]


class _Target:
    def __init__(self, model: Model, data: Dataset, beta: float):
        self.model = model
        self.lik = model.bind(data)
        self.beta = beta

    def logp(self, x):
        with np.errstate(over="ignore", invalid="ignore"):
            v = self.model.log_prior(x) + self.beta * self.lik.logp(x)
        return np.where(np.isfinite(v), v, -np.inf)

    def logp_grad(self, x):
        with np.errstate(over="ignore", invalid="ignore"):
            v = self.model.log_prior(x) + self.beta * self.lik.logp(x)
            g = self.model.grad_log_prior(x) + self.beta * self.lik.grad(x)
        bad = ~np.isfinite(v) | ~np.all(np.isfinite(g), axis=1)
        v = np.where(bad, -np.inf, v)
        g = np.where(bad[:, None], 0.0, g)
        return v, g


class _NoiseStream:
    """Per-chain block-buffered normal and uniform variates."""

    def __init__(self, rngs, d):
        self.rngs = rngs
        self.d = d
        self.pos = _BLOCK
        self.z = self.u = None

    def next(self):
        if self.pos == _BLOCK:
            self.z = np.stack([r.standard_normal((_BLOCK, self.d)) for r in self.rngs], axis=1)
            self.u = np.stack([r.random(_BLOCK) for r in self.rngs], axis=1)
            self.pos = 0
        i = self.pos
        self.pos += 1
        return self.z[i], self.u[i]


def _initial_state(model: Model, rngs) -> np.ndarray:
    if model.proper_prior:
        try:
            return np.concatenate([model.sample_prior(r, 1) for r in rngs], axis=0)
        except NotImplementedError:
            pass
    return np.stack([r.standard_normal(model.dim) for r in rngs])


def _adaptation_points(burn_in: int) -> list[int]:
    if burn_in < 200:
        return []
    return [int(burn_in * f) for f in (0.15, 0.3, 0.5, 0.75)]


def _gibbs_sampler(model: Model, data: Dataset, cfg: SamplerConfig, rngs, x):
    """Run a model-supplied exact conditional (Gibbs) kernel."""
    kernel = model.gibbs_kernel(data, cfg.beta)
    total = cfg.burn_in + cfg.draws_per_chain * cfg.thinning
    kept = []
    for t in range(total):
        x = np.stack([kernel(x[c], rngs[c]) for c in range(len(rngs))])
        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0:
            kept.append(x.copy())
    acc = np.ones(len(rngs))
    return np.stack(kept, axis=1), acc, np.zeros(len(rngs))


def _metropolis(model: Model, data: Dataset, cfg: SamplerConfig, rngs, x):
    target = _Target(model, data, cfg.beta)
    langevin = cfg.proposal == LANGEVIN
    if langevin and not model.has_gradient:
        raise DomainError(f"model {model.name} does not supply gradients")
    C, d = x.shape
    if langevin:
        lp, g = target.logp_grad(x)
    else:
        lp = target.logp(x)
    if not np.all(np.isfinite(lp)):
        raise SamplerError("bad init: non-finite target density at the initial point")

    goal = cfg.acceptance_goal
    log_eps = np.full(C, np.log(1.0 / np.sqrt(d)) if langevin else np.log(2.38 / np.sqrt(d)))
    scale = np.ones((C, d))  # diagonal proposal variance
    adapt_at = set(_adaptation_points(cfg.burn_in))
    win_mean = np.zeros((C, d))
    win_m2 = np.zeros((C, d))
    win_n = 0
    t_adapt = 0
    noise = _NoiseStream(rngs, d)

    total = cfg.burn_in + cfg.draws_per_chain * cfg.thinning
    kept = np.empty((C, cfg.draws_per_chain, d))
    accepted = np.zeros(C)
    k = 0
    for t in range(total):
        z, u = noise.next()
        eps = np.exp(log_eps)[:, None]
        sd = eps * np.sqrt(scale)
        if langevin:
            mean_x = x + 0.5 * eps**2 * scale * g
            y = mean_x + sd * z
            lp_y, g_y = target.logp_grad(y)
            mean_y = y + 0.5 * eps**2 * scale * g_y
            log_q_fwd = -0.5 * np.sum(z**2, axis=1)
            log_q_bwd = -0.5 * np.sum(((x - mean_y) / sd) ** 2, axis=1)
            log_ratio = lp_y - lp + log_q_bwd - log_q_fwd
        else:
            y = x + sd * z
            lp_y = target.logp(y)
            log_ratio = lp_y - lp
        log_ratio = np.where(np.isfinite(lp_y), log_ratio, -np.inf)
        accept = np.log(u) < log_ratio
        x = np.where(accept[:, None], y, x)
        lp = np.where(accept, lp_y, lp)
        if langevin:
            g = np.where(accept[:, None], g_y, g)

        if t < cfg.burn_in:
            alpha = np.exp(np.minimum(0.0, np.nan_to_num(log_ratio, nan=-np.inf)))
            t_adapt += 1
            log_eps = log_eps + (alpha - goal) / t_adapt**0.6
            win_n += 1
            delta = x - win_mean
            win_mean += delta / win_n
            win_m2 += delta * (x - win_mean)
            if t + 1 in adapt_at:
                if win_n > 10:
                    var = win_m2 / (win_n - 1)
                    w = win_n / (win_n + 5.0)
                    scale = w * var + (1.0 - w) * 1e-3
                    scale = scale / np.exp(np.mean(np.log(scale), axis=1, keepdims=True))
                    log_eps = log_eps + 0.5 * np.mean(np.log(w * var + (1.0 - w) * 1e-3), axis=1)
                win_mean[:] = 0.0
                win_m2[:] = 0.0
                win_n = 0
                t_adapt = 0
        else:
            accepted += accept
            j = t - cfg.burn_in
            if j % cfg.thinning == 0:
                kept[:, k] = x
                k += 1
    acc = accepted / (cfg.draws_per_chain * cfg.thinning)
    return kept, acc, np.exp(log_eps)


def sample_tempered(model: Model, data: Dataset, cfg: SamplerConfig = SamplerConfig()) -> PosteriorDraws:
    """Sample the tempered posterior and fill the pointwise log-likelihood matrix."""
    if data.n < 1:
        raise DomainError("cannot sample a posterior from an empty dataset")
    rngs = chain_rngs(cfg.seed, cfg.chains)
    x0 = _initial_state(model, rngs)
    if cfg.proposal == GIBBS:
        chains, acc, eps = _gibbs_sampler(model, data, cfg, rngs, x0)
    else:
        chains, acc, eps = _metropolis(model, data, cfg, rngs, x0)
    if cfg.proposal != GIBBS and np.all(acc < 0.01):
        raise SamplerError(f"sampler stuck: acceptance rates {acc.tolist()}")
    theta = chains.reshape(-1, model.dim)
    loglik = pointwise_loglik(model, theta, data.items)
    bad = np.flatnonzero(~np.all(np.isfinite(loglik), axis=0))
    if bad.size:
        raise SamplerError(f"non-finite log-likelihood for observation {int(bad[0])}")
    return PosteriorDraws(
        theta=theta,
        loglik=loglik,
        beta=float(cfg.beta),
        chains=cfg.chains,
        rhat=rhat(chains),
        ess=ess(chains),
        acceptance_rate=acc,
        step_size=eps,
    )


def pointwise_loglik(model: Model, theta: np.ndarray, items: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """``log p(x_i|theta_s)`` for all draws and items, evaluated in row chunks."""
    out = np.empty((theta.shape[0], items.shape[0]))
    for start in range(0, theta.shape[0], chunk):
        out[start:start + chunk] = model.loglik_pointwise(theta[start:start + chunk], items)
    return out


def posterior_functionals(draws: PosteriorDraws, variance: bool = True):
    """Posterior mean and variance of each ``log p(X_i|theta)``.

    Returns ``(mean, var)`` of shape ``(n,)`` each; the variance uses the
    ``S - 1`` divisor.
    """
    mean = draws.loglik.mean(axis=0)
    if not variance:
        return mean, None
    if draws.S < 2:
        raise DomainError("posterior variance needs at least two draws")
    return mean, draws.loglik.var(axis=0, ddof=1)
