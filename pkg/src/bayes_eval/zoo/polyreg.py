"""Polynomial regression with a normal-gamma prior that may be improper.

Observations are pairs ``(x, y)`` stored as rows of length 2. The model is
``y | x ~ N(a . f(x), 1/s)`` with ``f(x) = (1, x, ..., x^{K-1})`` and prior
``pi(a, s) ∝ s^{b-1} exp(-c s - (d s / 2) ||a||^2)``; flat coordinates are
``(a, log s)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, polygamma
from scipy.stats import t as student_t

from ..core import Dataset, DomainError, Model, Truth

LOG_2PI = np.log(2.0 * np.pi)


def features(x: np.ndarray, K: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    return x[:, None] ** np.arange(K)[None, :]


class PolyRegression(Model):
    name = "polynomial_regression"
    has_gradient = True

    def __init__(self, K: int = 3, b: float = 2.0, c: float = 0.01, d: float = 0.01):
        if K < 1 or c <= 0 or d <= 0:
            raise DomainError("need K >= 1, c > 0, d > 0")
        self.K, self.b, self.c, self.d = int(K), float(b), float(c), float(d)
        self.dim = self.K + 1
        self.proper_prior = self.b > self.K / 2
        if self.proper_prior:
            shape = self.b - self.K / 2
            self._log_norm = 0.5 * self.K * (LOG_2PI - np.log(self.d)) + gammaln(shape) - shape * np.log(self.c)
        else:
            self._log_norm = 0.0

    def config(self) -> dict:
        return {"model": self.name, "K": self.K, "b": self.b, "c": self.c, "d": self.d}

    def with_b(self, b: float) -> "PolyRegression":
        return PolyRegression(self.K, b, self.c, self.d)

    def loglik_pointwise(self, theta, items):
        theta = np.atleast_2d(theta)
        items = np.asarray(items, dtype=float).reshape(-1, 2)
        F = features(items[:, 0], self.K)
        a, ls = theta[:, : self.K], theta[:, self.K]
        r = items[None, :, 1] - a @ F.T
        return 0.5 * (ls[:, None] - LOG_2PI) - 0.5 * np.exp(ls)[:, None] * r**2

    def log_prior(self, theta):
        theta = np.atleast_2d(theta)
        a, ls = theta[:, : self.K], theta[:, self.K]
        s = np.exp(ls)
        return self.b * ls - self.c * s - 0.5 * self.d * s * np.sum(a * a, axis=1) - self._log_norm

    def grad_log_prior(self, theta):
        a, ls = theta[:, : self.K], theta[:, self.K]
        s = np.exp(ls)
        ga = -self.d * s[:, None] * a
        gs = self.b - self.c * s - 0.5 * self.d * s * np.sum(a * a, axis=1)
        return np.concatenate([ga, gs[:, None]], axis=1)

    def sample_prior(self, rng, size):
        if not self.proper_prior:
            raise NotImplementedError
        s = rng.gamma(self.b - self.K / 2, 1.0 / self.c, size)
        a = rng.standard_normal((size, self.K)) / np.sqrt(self.d * s)[:, None]
        return np.concatenate([a, np.log(s)[:, None]], axis=1)

    def bind(self, data):
        return _PolyLikelihood(self, data)

    def score(self, theta, items):
        """Per-observation gradient of ``log p(y|x, theta)`` in flat coordinates; ``(n, d)``."""
        items = np.asarray(items, dtype=float).reshape(-1, 2)
        F = features(items[:, 0], self.K)
        a, ls = theta[: self.K], theta[self.K]
        s = np.exp(ls)
        r = items[:, 1] - F @ a
        return np.concatenate([(s * r)[:, None] * F, (0.5 - 0.5 * s * r**2)[:, None]], axis=1)

    def gibbs_kernel(self, data: Dataset, beta: float):
        """Independent draws from the exact (tempered) normal-gamma posterior."""
        post = conjugate_posterior(self, data, beta)

        def step(theta, rng):
            return post.sample(rng, 1)[0]

        return step


class _PolyLikelihood:
    def __init__(self, model: PolyRegression, data: Dataset):
        items = data.items.reshape(-1, 2)
        F = features(items[:, 0], model.K)
        y = items[:, 1]
        self.K, self.n = model.K, len(y)
        self.FtF, self.Fty, self.yy = F.T @ F, F.T @ y, float(y @ y)

    def _rss(self, a):
        return self.yy - 2 * a @ self.Fty + np.einsum("sk,kl,sl->s", a, self.FtF, a)

    def logp(self, theta):
        a, ls = theta[:, : self.K], theta[:, self.K]
        return 0.5 * self.n * (ls - LOG_2PI) - 0.5 * np.exp(ls) * self._rss(a)

    def grad(self, theta):
        a, ls = theta[:, : self.K], theta[:, self.K]
        s = np.exp(ls)
        ga = s[:, None] * (self.Fty[None, :] - a @ self.FtF)
        gs = 0.5 * self.n - 0.5 * s * self._rss(a)
        return np.concatenate([ga, gs[:, None]], axis=1)


def polyreg_truth(a0=(1.0, -0.2, 1.0 / 30.0), s0: float = 25.0) -> Truth:
    """``x ~ N(0, 1)``, ``y | x ~ N(a0 . f(x), 1/s0)``; log density and entropy are conditional on x."""
    a0 = np.asarray(a0, dtype=float)
    K = a0.size
    model = PolyRegression(K, b=K, c=0.01, d=0.01)
    theta0 = np.concatenate([a0, [np.log(s0)]])
    theta0.setflags(write=False)

    def sampler(m, rng):
        x = rng.standard_normal(m)
        y = features(x, K) @ a0 + rng.standard_normal(m) / np.sqrt(s0)
        return np.stack([x, y], axis=1)

    def conditional(x, rng):
        x = np.asarray(x, dtype=float).reshape(-1)
        y = features(x, K) @ a0 + rng.standard_normal(x.size) / np.sqrt(s0)
        return np.stack([x, y], axis=1)

    return Truth(
        model=model,
        theta0=theta0,
        entropy=0.5 * (1.0 + LOG_2PI - np.log(s0)),
        sampler=sampler,
        conditional=conditional,
    )


@dataclass(frozen=True)
class NormalGammaPosterior:
    """``a | s ~ N(mean, (s Lambda)^{-1})``, ``s ~ Gamma(shape, rate)``."""

    mean: np.ndarray
    Lambda: np.ndarray
    shape: float
    rate: float
    K: int

    @property
    def cov_unit(self):
        return np.linalg.inv(self.Lambda)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        s = rng.gamma(self.shape, 1.0 / self.rate, size)
        L = np.linalg.cholesky(self.Lambda)
        z = rng.standard_normal((size, self.K))
        a = self.mean[None, :] + np.linalg.solve(L.T, z.T).T / np.sqrt(s)[:, None]
        return np.concatenate([a, np.log(s)[:, None]], axis=1)

    def predictive_logpdf(self, x, y) -> np.ndarray:
        """Student-t posterior predictive ``log p(y|x, data)``."""
        F = features(x, self.K)
        loc = F @ self.mean
        v = np.einsum("ik,kl,il->i", F, self.cov_unit, F)
        scale = np.sqrt(self.rate / self.shape * (1.0 + v))
        return student_t.logpdf(np.asarray(y, dtype=float).reshape(-1), df=2 * self.shape, loc=loc, scale=scale)

    def loglik_moments(self, x, y):
        """Posterior mean and variance of ``log p(y|x, a, s)`` in closed form."""
        F = features(x, self.K)
        mu = np.asarray(y, dtype=float).reshape(-1) - F @ self.mean
        v = np.einsum("ik,kl,il->i", F, self.cov_unit, F)
        al, be = self.shape, self.rate
        es = al / be
        e_log_s = digamma(al) - np.log(be)
        mean = 0.5 * (e_log_s - LOG_2PI) - 0.5 * (mu**2 * es + v)
        var = mu**2 * v * es + 0.5 * v**2 + 0.25 * polygamma(1, al) + 0.25 * mu**4 * al / be**2 - 0.5 * mu**2 / be
        return mean, var


def conjugate_posterior(model: PolyRegression, data: Dataset, beta: float = 1.0) -> NormalGammaPosterior:
    """Exact (tempered) posterior; raises when it is not normalizable."""
    items = data.items.reshape(-1, 2)
    F = features(items[:, 0], model.K)
    y = items[:, 1]
    Lam = model.d * np.eye(model.K) + beta * F.T @ F
    try:
        np.linalg.cholesky(Lam)
    except np.linalg.LinAlgError:
        raise DomainError("posterior undefined for this hyperparameter/data") from None
    mean = np.linalg.solve(Lam, beta * F.T @ y)
    shape = model.b - model.K / 2 + beta * len(y) / 2
    rate = model.c + 0.5 * (beta * y @ y - mean @ Lam @ mean)
    if not (shape > 0 and rate > 0):
        raise DomainError("posterior undefined for this hyperparameter/data")
    return NormalGammaPosterior(mean, Lam, float(shape), float(rate), model.K)


class PolyRegressionExact:
    """Closed-form evaluation criteria of :class:`PolyRegression` on one dataset."""

    def __init__(self, model: PolyRegression, data: Dataset):
        self.model = model
        self.data = data
        self.items = data.items.reshape(-1, 2)
        self.post = conjugate_posterior(model, data)

    @property
    def n(self):
        return len(self.items)

    def log_marginal_likelihood(self) -> float:
        if not self.model.proper_prior:
            raise DomainError("free energy undefined / may be made infinite for an improper prior")
        m, p = self.model, self.post
        shape0 = m.b - m.K / 2
        _, logdet = np.linalg.slogdet(p.Lambda)
        return float(
            -0.5 * self.n * LOG_2PI
            + 0.5 * m.K * np.log(m.d)
            - 0.5 * logdet
            + shape0 * np.log(m.c)
            - p.shape * np.log(p.rate)
            + gammaln(p.shape)
            - gammaln(shape0)
        )

    def free_energy(self) -> float:
        return -self.log_marginal_likelihood()

    def training_loss(self) -> float:
        return float(-np.mean(self.post.predictive_logpdf(self.items[:, 0], self.items[:, 1])))

    def functional_variance(self) -> np.ndarray:
        return self.post.loglik_moments(self.items[:, 0], self.items[:, 1])[1]

    def waic(self) -> float:
        return self.training_loss() + float(np.mean(self.functional_variance()))

    def loo_pointwise(self) -> np.ndarray:
        out = np.empty(self.n)
        for i in range(self.n):
            post = conjugate_posterior(self.model, self.data.without(i))
            out[i] = post.predictive_logpdf(self.items[i : i + 1, 0], self.items[i : i + 1, 1])[0]
        return out

    def loo(self) -> float:
        return float(-np.mean(self.loo_pointwise()))

    def holdout(self, test: Dataset) -> float:
        t = test.items.reshape(-1, 2)
        if len(t) == 0:
            raise DomainError("empty hold-out split")
        return float(-np.mean(self.post.predictive_logpdf(t[:, 0], t[:, 1])))

    def dic(self) -> float:
        """``2 E[L_n] - L_n(theta_bar)`` with ``theta_bar`` the flat-coordinate posterior mean."""
        mean_ll, _ = self.post.loglik_moments(self.items[:, 0], self.items[:, 1])
        e_loss = -float(np.mean(mean_ll))
        theta_bar = np.concatenate([self.post.mean, [digamma(self.post.shape) - np.log(self.post.rate)]])
        plug = -float(np.mean(self.model.log_density(self.items, theta_bar)))
        return 2.0 * e_loss - plug

    def gen_loss_error(self, truth_a0, s0: float, nodes: int = 40) -> float:
        """``G_n - S`` for ``x ~ N(0,1)``, ``y|x ~ N(a0.f(x), 1/s0)`` by Gauss-Hermite quadrature."""
        gx, gw = np.polynomial.hermite_e.hermegauss(nodes)
        gw = gw / gw.sum()
        a0 = np.asarray(truth_a0, dtype=float)
        xs = np.repeat(gx, nodes)
        ys = np.repeat(features(gx, len(a0)) @ a0, nodes) + np.tile(gx, nodes) / np.sqrt(s0)
        w = np.outer(gw, gw).ravel()
        logq = -0.5 * LOG_2PI + 0.5 * np.log(s0) - 0.5 * np.tile(gx, nodes) ** 2
        logp = self.post.predictive_logpdf(xs, ys)
        return float(w @ (logq - logp))


def ols_mle(model: PolyRegression, data: Dataset):
    """Least-squares coefficients and precision MLE; returns ``(theta_hat, L_n)``."""
    items = data.items.reshape(-1, 2)
    F = features(items[:, 0], model.K)
    a, *_ = np.linalg.lstsq(F, items[:, 1], rcond=None)
    rss = float(np.sum((items[:, 1] - F @ a) ** 2))
    s = len(items) / rss
    theta = np.concatenate([a, [np.log(s)]])
    loss = float(-np.mean(model.log_density(items, theta)))
    return theta, loss
