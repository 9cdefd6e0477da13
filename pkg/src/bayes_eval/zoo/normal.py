"""Normal models: location with known precision, and the mean-precision model
whose free energy and leave-one-out loss have closed forms in the prior
hyperparameter ``a``."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from ..core import Dataset, DomainError, Model, Truth

LOG_2PI = np.log(2.0 * np.pi)


class NormalLocation(Model):
    """``x ~ N(m, 1/tau)`` with known ``tau`` and prior ``m ~ N(m0, 1/tau0)``.

    ``tau0 = 0`` gives the improper flat prior.
    """

    name = "normal_location"
    dim = 1
    has_gradient = True

    def __init__(self, tau: float = 1.0, m0: float = 0.0, tau0: float = 1.0):
        self.tau, self.m0, self.tau0 = float(tau), float(m0), float(tau0)
        self.proper_prior = self.tau0 > 0

    def config(self) -> dict:
        return {"model": self.name, "tau": self.tau, "m0": self.m0, "tau0": self.tau0}

    def loglik_pointwise(self, theta, items):
        m = np.atleast_2d(theta)[:, :1]
        x = np.asarray(items, dtype=float).reshape(1, -1)
        return 0.5 * (np.log(self.tau) - LOG_2PI) - 0.5 * self.tau * (x - m) ** 2

    def log_prior(self, theta):
        m = np.atleast_2d(theta)[:, 0]
        if not self.proper_prior:
            return np.zeros_like(m)
        return 0.5 * (np.log(self.tau0) - LOG_2PI) - 0.5 * self.tau0 * (m - self.m0) ** 2

    def grad_log_prior(self, theta):
        return -self.tau0 * (theta - self.m0)

    def sample_prior(self, rng, size):
        return (self.m0 + rng.standard_normal(size) / np.sqrt(self.tau0))[:, None]

    def bind(self, data):
        return _LocationLikelihood(self, data)

    def posterior(self, data: Dataset, beta: float = 1.0):
        """Mean and precision of the (tempered) conjugate posterior."""
        x = data.items.reshape(-1)
        prec = self.tau0 + beta * self.tau * x.size
        mean = (self.tau0 * self.m0 + beta * self.tau * x.sum()) / prec
        return mean, prec

    def gibbs_kernel(self, data: Dataset, beta: float):
        mean, prec = self.posterior(data, beta)

        def step(theta, rng):
            return np.array([mean + rng.standard_normal() / np.sqrt(prec)])

        return step

    def score(self, theta, items):
        """Per-observation gradient of ``log p(x|m)``; shape ``(n, 1)``."""
        x = np.asarray(items, dtype=float).reshape(-1)
        return (self.tau * (x - theta[0]))[:, None]


class _LocationLikelihood:
    def __init__(self, model, data):
        x = data.items.reshape(-1)
        self.model, self.n, self.sx, self.sxx = model, x.size, x.sum(), (x**2).sum()

    def logp(self, theta):
        m = theta[:, 0]
        t = self.model.tau
        return self.n * 0.5 * (np.log(t) - LOG_2PI) - 0.5 * t * (self.sxx - 2 * m * self.sx + self.n * m**2)

    def grad(self, theta):
        return (self.model.tau * (self.sx - self.n * theta[:, 0]))[:, None]


def normal_truth(mean: float = 0.0, sd: float = 1.0) -> Truth:
    def sampler(m, rng):
        return mean + sd * rng.standard_normal(m)

    def logq(items):
        x = np.asarray(items, dtype=float).reshape(-1)
        return -0.5 * LOG_2PI - np.log(sd) - 0.5 * ((x - mean) / sd) ** 2

    return Truth(entropy=0.5 * (1.0 + LOG_2PI) + np.log(sd), sampler=sampler, log_density_fn=logq)


class NormalMeanPrecision(Model):
    """``x ~ N(m, 1/s)`` with prior ``pi(m, s|a) = (a/2) sqrt(s/2pi) exp(-(s/2)(m^2 + a))``.

    Flat coordinates are ``(m, log s)``; the prior is proper for every ``a > 0``.
    """

    name = "normal_mean_precision"
    dim = 2
    proper_prior = True
    has_gradient = True

    def __init__(self, a: float):
        if a <= 0:
            raise DomainError("hyperparameter a must be positive")
        self.a = float(a)

    def config(self) -> dict:
        return {"model": self.name, "a": self.a}

    def loglik_pointwise(self, theta, items):
        theta = np.atleast_2d(theta)
        m, ls = theta[:, :1], theta[:, 1:2]
        x = np.asarray(items, dtype=float).reshape(1, -1)
        return 0.5 * (ls - LOG_2PI) - 0.5 * np.exp(ls) * (x - m) ** 2

    def log_prior(self, theta):
        theta = np.atleast_2d(theta)
        m, ls = theta[:, 0], theta[:, 1]
        s = np.exp(ls)
        return np.log(self.a / 2) + 0.5 * (ls - LOG_2PI) - 0.5 * s * (m**2 + self.a) + ls

    def grad_log_prior(self, theta):
        m, ls = theta[:, 0], theta[:, 1]
        s = np.exp(ls)
        return np.stack([-s * m, 1.5 - 0.5 * s * (m**2 + self.a)], axis=1)

    def sample_prior(self, rng, size):
        s = rng.exponential(2.0 / self.a, size)  # Gamma(1, rate a/2)
        m = rng.standard_normal(size) / np.sqrt(s)
        return np.stack([m, np.log(s)], axis=1)

    def bind(self, data):
        return _MeanPrecisionLikelihood(self, data)


class _MeanPrecisionLikelihood:
    def __init__(self, model, data):
        x = data.items.reshape(-1)
        self.n, self.sx, self.sxx = x.size, x.sum(), (x**2).sum()

    def logp(self, theta):
        m, ls = theta[:, 0], theta[:, 1]
        q = self.sxx - 2 * m * self.sx + self.n * m**2
        return 0.5 * self.n * (ls - LOG_2PI) - 0.5 * np.exp(ls) * q

    def grad(self, theta):
        m, ls = theta[:, 0], theta[:, 1]
        s = np.exp(ls)
        q = self.sxx - 2 * m * self.sx + self.n * m**2
        return np.stack([s * (self.sx - self.n * m), 0.5 * self.n - 0.5 * s * q], axis=1)


def _stats(data):
    x = np.asarray(data.items if isinstance(data, Dataset) else data, dtype=float).reshape(-1)
    return x, float(np.sum(x**2)), float(np.sum(x))


def normal_fn_cn(data, a: float):
    """Free energy and leave-one-out loss as functions of ``a``, up to ``a``-free constants.

    ``F_n(a) = -log a + ((n+1)/2) log((A+a)(n+1) - B^2)`` and
    ``C_n(a) = ((n+1)/2) log((A+a)(n+1) - B^2) - (1/2) sum_i log((A - X_i^2 + a) n - (B - X_i)^2)``
    with ``A = sum X_i^2`` and ``B = sum X_i``.
    """
    if a <= 0:
        raise DomainError("hyperparameter a must be positive")
    x, A, B = _stats(data)
    n = x.size
    full = (A + a) * (n + 1) - B**2
    loo = (A - x**2 + a) * n - (B - x) ** 2
    if full <= 0 or np.any(loo <= 0):
        raise DomainError("degenerate sufficient statistics")
    f = -np.log(a) + 0.5 * (n + 1) * np.log(full)
    c = 0.5 * (n + 1) * np.log(full) - 0.5 * np.sum(np.log(loo))
    return float(f), float(c)


def _log_evidence(n: int, A: float, B: float, a: float) -> float:
    q = A + a - B**2 / (n + 1)
    return (
        np.log(a / 2)
        - 0.5 * n * LOG_2PI
        - 0.5 * np.log(n + 1)
        + gammaln(n / 2 + 1)
        + (n / 2 + 1) * np.log(2.0 / q)
    )


def normal_exact_fn_cn(data, a: float):
    """Fully normalized free energy and leave-one-out loss of :class:`NormalMeanPrecision`."""
    x, A, B = _stats(data)
    n = x.size
    f = -_log_evidence(n, A, B, a)
    loo = _log_evidence(n - 1, A - x**2, B - x, a) - _log_evidence(n, A, B, a)
    return float(f), float(np.mean(loo))


def minimize_hyper(fun, lo: float = 1e-3, hi: float = 20.0, grid: int = 400) -> float:
    """Global minimizer of a scalar function on ``(lo, hi]``: log grid, then bounded refinement."""
    aa = np.geomspace(lo, hi, grid)
    vals = np.array([fun(v) for v in aa])
    k = int(np.argmin(vals))
    left, right = aa[max(k - 1, 0)], aa[min(k + 1, grid - 1)]
    if left == right:
        return float(aa[k])
    res = minimize_scalar(fun, bounds=(left, right), method="bounded", options={"xatol": 1e-6})
    return float(res.x if res.fun <= vals[k] else aa[k])
