"""Bernoulli likelihood with a Beta prior: every quantity has a closed form."""

from __future__ import annotations

import numpy as np
from scipy.special import betaln, expit, logsumexp

from ..core import Dataset, DomainError, Model, Truth

GRID_SIZE = 100_000


class BernoulliBeta(Model):
    """``x ~ Bernoulli(theta)``, ``theta ~ Beta(alpha, beta0)``; flat coordinate is ``logit(theta)``."""

    name = "bernoulli_beta"
    dim = 1
    proper_prior = True
    has_gradient = True

    def __init__(self, alpha: float = 1.0, beta0: float = 1.0):
        if alpha <= 0 or beta0 <= 0:
            raise DomainError("Beta prior shapes must be positive")
        self.alpha, self.beta0 = float(alpha), float(beta0)

    def config(self) -> dict:
        return {"model": self.name, "alpha": self.alpha, "beta0": self.beta0}

    @staticmethod
    def _logs(theta):
        eta = np.asarray(theta, dtype=float)[:, 0]
        # log(theta), log(1 - theta) without cancellation
        return -np.logaddexp(0.0, -eta), -np.logaddexp(0.0, eta)

    def loglik_pointwise(self, theta, items):
        lt, l1t = self._logs(np.atleast_2d(theta))
        x = np.asarray(items, dtype=float).reshape(-1)
        return x[None, :] * lt[:, None] + (1.0 - x[None, :]) * l1t[:, None]

    def log_prior(self, theta):
        lt, l1t = self._logs(np.atleast_2d(theta))
        return self.alpha * lt + self.beta0 * l1t - betaln(self.alpha, self.beta0)

    def grad_log_prior(self, theta):
        p = expit(theta[:, 0])
        return (self.alpha * (1.0 - p) - self.beta0 * p)[:, None]

    def sample_prior(self, rng, size):
        p = rng.beta(self.alpha, self.beta0, size)
        return np.log(p / (1.0 - p))[:, None]

    def bind(self, data):
        return _BernoulliLikelihood(self, data)

    def gibbs_kernel(self, data: Dataset, beta: float):
        k = float(np.sum(data.items))
        n = data.n
        a, b = self.alpha + beta * k, self.beta0 + beta * (n - k)

        def step(theta, rng):
            p = rng.beta(a, b)
            return np.array([np.log(p) - np.log1p(-p)])

        return step


class _BernoulliLikelihood:
    def __init__(self, model, data):
        self.k = float(np.sum(data.items))
        self.n = data.n
        self.model = model

    def logp(self, theta):
        lt, l1t = BernoulliBeta._logs(theta)
        return self.k * lt + (self.n - self.k) * l1t

    def grad(self, theta):
        return (self.k - self.n * expit(theta[:, 0]))[:, None]


def bernoulli_truth(p: float) -> Truth:
    p = float(p)

    def sampler(m, rng):
        return (rng.random(m) < p).astype(float)

    def logq(items):
        x = np.asarray(items, dtype=float).reshape(-1)
        with np.errstate(divide="ignore"):
            return np.where(x == 1.0, np.log(p), np.log1p(-p))

    ent = -(p * np.log(p) + (1 - p) * np.log1p(-p)) if 0 < p < 1 else 0.0
    if 0 < p < 1:
        # realizable: density goes through the model at the true logit
        theta0 = np.array([np.log(p) - np.log1p(-p)])
        theta0.setflags(write=False)
        return Truth(model=BernoulliBeta(), theta0=theta0, entropy=float(ent), sampler=sampler)
    return Truth(entropy=float(ent), sampler=sampler, log_density_fn=logq)


class BernoulliBetaExact:
    """Closed forms and dense-grid quadrature for the Bernoulli-Beta model."""

    def __init__(self, data, alpha: float = 1.0, beta0: float = 1.0):
        x = np.asarray(data.items if isinstance(data, Dataset) else data, dtype=float).reshape(-1)
        if not np.all((x == 0) | (x == 1)):
            raise DomainError("Bernoulli data must be binary")
        self.x = x
        self.n = x.size
        self.k = float(x.sum())
        self.alpha, self.beta0 = float(alpha), float(beta0)

    @property
    def posterior(self):
        return self.alpha + self.k, self.beta0 + self.n - self.k

    def log_marginal_likelihood(self) -> float:
        a, b = self.posterior
        return float(betaln(a, b) - betaln(self.alpha, self.beta0))

    def free_energy(self) -> float:
        return -self.log_marginal_likelihood()

    def predictive(self, x: float = 1.0) -> float:
        """Posterior predictive probability of observing ``x``."""
        a, b = self.posterior
        p1 = a / (a + b)
        return p1 if x == 1 else 1.0 - p1

    def training_loss(self) -> float:
        return float(-np.mean(np.log([self.predictive(xi) for xi in self.x])))

    def loo(self) -> float:
        """Exact leave-one-out loss from the leave-one-out Beta posteriors."""
        a, b = self.posterior
        terms = []
        for xi in self.x:
            ai, bi = a - xi, b - (1 - xi)
            p1 = ai / (ai + bi)
            terms.append(np.log(p1 if xi == 1 else 1 - p1))
        return float(-np.mean(terms))

    def holdout(self, test) -> float:
        t = np.asarray(test, dtype=float).reshape(-1)
        return float(-np.mean(np.log([self.predictive(xi) for xi in t])))

    def gen_loss(self, p_true: float) -> float:
        p1 = self.predictive(1.0)
        return float(-(p_true * np.log(p1) + (1 - p_true) * np.log(1 - p1)))

    # dense-grid quadrature over theta in (0, 1)
    def _grid(self):
        theta = (np.arange(GRID_SIZE) + 0.5) / GRID_SIZE
        a, b = self.posterior
        logw = (a - 1) * np.log(theta) + (b - 1) * np.log1p(-theta)
        w = np.exp(logw - logsumexp(logw))
        return theta, w

    def pointwise_moments(self):
        """Posterior mean and variance of ``log p(X_i|theta)`` by quadrature."""
        theta, w = self._grid()
        ll = np.where(self.x[:, None] == 1, np.log(theta)[None, :], np.log1p(-theta)[None, :])
        mean = ll @ w
        var = (ll**2) @ w - mean**2
        return mean, var

    def waic(self) -> float:
        _, var = self.pointwise_moments()
        return self.training_loss() + float(np.mean(var))

    def dic(self) -> float:
        """Per-sample DIC with the posterior mean taken in logit coordinates."""
        theta, w = self._grid()
        ll = np.where(self.x[:, None] == 1, np.log(theta)[None, :], np.log1p(-theta)[None, :])
        e_loss = -float(np.mean(ll @ w))
        eta_bar = float(np.log(theta / (1 - theta)) @ w)
        p = expit(eta_bar)
        plug = -float(np.mean(np.where(self.x == 1, np.log(p), np.log1p(-p))))
        return 2.0 * e_loss - plug

    def posterior_mean_theta(self) -> float:
        a, b = self.posterior
        return a / (a + b)

    def posterior_var_theta(self) -> float:
        a, b = self.posterior
        return a * b / ((a + b) ** 2 * (a + b + 1))


def expected_free_energy(n: int, p: float, alpha: float = 1.0, beta0: float = 1.0) -> float:
    """``E[F_n]`` under ``x ~ Bernoulli(p)`` by exact enumeration of the success count."""
    from scipy.stats import binom

    if n == 0:
        return 0.0
    k = np.arange(n + 1)
    fn = -(betaln(alpha + k, beta0 + n - k) - betaln(alpha, beta0))
    return float(binom.pmf(k, n, p) @ fn)


def expected_gen_loss(n: int, p: float, alpha: float = 1.0, beta0: float = 1.0) -> float:
    """``E[G_n]`` under ``x ~ Bernoulli(p)`` by exact enumeration."""
    from scipy.stats import binom

    k = np.arange(n + 1)
    p1 = (alpha + k) / (alpha + beta0 + n)
    g = -(p * np.log(p1) + (1 - p) * np.log1p(-p1))
    return float(binom.pmf(k, n, p) @ g)
