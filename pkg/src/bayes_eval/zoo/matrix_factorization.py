"""Gaussian matrix factorization ``X = AB + noise`` with Gaussian priors on A and B."""

from __future__ import annotations

import numpy as np

from ..core import BoundLikelihood, Dataset, DomainError, Model, Truth, empirical_log_loss

LOG_2PI = np.log(2.0 * np.pi)


class MatrixFactorization(Model):
    """``p(X|A,B) = N(X; AB, I)`` entrywise, ``A ~ N(0, rho^2)``, ``B ~ N(0, mu^2)``.

    Flat layout is ``theta = vec(A) || vec(B)`` (row-major), ``d = MH + HN``.
    """

    name = "matrix_factorization"
    proper_prior = True
    has_gradient = True

    def __init__(self, M: int, N: int, H: int, rho: float = 10.0, mu: float = 10.0):
        if min(M, N, H) < 1:
            raise DomainError("M, N, H must be positive")
        self.M, self.N, self.H = int(M), int(N), int(H)
        self.rho, self.mu = float(rho), float(mu)
        self.dim = self.M * self.H + self.H * self.N
        self._prior_const = -0.5 * self.M * self.H * (LOG_2PI + 2 * np.log(self.rho)) - 0.5 * self.H * self.N * (
            LOG_2PI + 2 * np.log(self.mu)
        )

    @property
    def effective_dim(self) -> int:
        """Parameter count modulo the GL(H) symmetry, ``MH + HN - H^2``."""
        return self.M * self.H + self.H * self.N - self.H**2

    def config(self) -> dict:
        return {"model": self.name, "M": self.M, "N": self.N, "H": self.H, "rho": self.rho, "mu": self.mu}

    def unpack(self, theta: np.ndarray):
        theta = np.atleast_2d(theta)
        k = self.M * self.H
        A = theta[:, :k].reshape(-1, self.M, self.H)
        B = theta[:, k:].reshape(-1, self.H, self.N)
        return A, B

    def pack(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(A, float).ravel(), np.asarray(B, float).ravel()])

    def product(self, theta: np.ndarray) -> np.ndarray:
        A, B = self.unpack(theta)
        return A @ B

    def embed(self, W: np.ndarray) -> np.ndarray:
        """Flat parameter with ``AB = W`` for ``rank(W) <= H`` (exact for diagonal W)."""
        W = np.asarray(W, dtype=float)
        if W.shape != (self.M, self.N):
            raise DomainError(f"matrix shape {W.shape} does not match ({self.M}, {self.N})")
        diag = np.diag(W)
        off = W.copy()
        off[np.arange(diag.size), np.arange(diag.size)] = 0.0
        if not np.any(off):
            idx = np.flatnonzero(diag)
            if idx.size > self.H:
                raise DomainError(f"rank {idx.size} truth not realizable with H={self.H}")
            A = np.zeros((self.M, self.H))
            B = np.zeros((self.H, self.N))
            for h, j in enumerate(idx):
                A[j, h] = diag[j]
                B[h, j] = 1.0
            return self.pack(A, B)
        A, B = low_rank_factors(W, self.H)
        return self.pack(A, B)

    def loglik_pointwise(self, theta, items):
        W = self.product(theta).reshape(-1, self.M * self.N)
        X = np.asarray(items).reshape(-1, self.M * self.N)
        sq = np.sum(X * X, axis=1)[None, :] - 2.0 * (W @ X.T) + np.sum(W * W, axis=1)[:, None]
        return -0.5 * sq - 0.5 * self.M * self.N * LOG_2PI

    def log_prior(self, theta):
        A, B = self.unpack(theta)
        return (
            -0.5 * np.sum(A * A, axis=(1, 2)) / self.rho**2
            - 0.5 * np.sum(B * B, axis=(1, 2)) / self.mu**2
            + self._prior_const
        )

    def grad_log_prior(self, theta):
        k = self.M * self.H
        g = np.empty_like(theta)
        g[:, :k] = -theta[:, :k] / self.rho**2
        g[:, k:] = -theta[:, k:] / self.mu**2
        return g

    def sample_prior(self, rng, size):
        k = self.M * self.H
        out = np.empty((size, self.dim))
        out[:, :k] = self.rho * rng.standard_normal((size, k))
        out[:, k:] = self.mu * rng.standard_normal((size, self.dim - k))
        return out

    def bind(self, data: Dataset) -> "_MFLikelihood":
        return _MFLikelihood(self, data)

    def gibbs_kernel(self, data: Dataset, beta: float):
        """Exact alternating conditional draws of A given B and B given A."""
        n = data.n
        xbar = data.items.mean(axis=0)
        M, N, H = self.M, self.N, self.H
        prec_a = np.eye(H) / self.rho**2
        prec_b = np.eye(H) / self.mu**2

        def step(theta, rng):
            A, B = self.unpack(theta)
            A, B = A[0], B[0]
            P = beta * n * (B @ B.T) + prec_a
            L = np.linalg.cholesky(P)
            rhs = beta * n * (xbar @ B.T)  # (M, H)
            mean = np.linalg.solve(P, rhs.T).T
            A = mean + np.linalg.solve(L.T, rng.standard_normal((H, M))).T
            P = beta * n * (A.T @ A) + prec_b
            L = np.linalg.cholesky(P)
            rhs = beta * n * (A.T @ xbar)  # (H, N)
            mean = np.linalg.solve(P, rhs)
            B = mean + np.linalg.solve(L.T, rng.standard_normal((H, N)))
            return self.pack(A, B)

        return step


class _MFLikelihood(BoundLikelihood):
    """Total log-likelihood through the sufficient statistics ``(n, Xbar, sum ||X_i||^2)``."""

    def __init__(self, model: MatrixFactorization, data: Dataset):
        super().__init__(model, data)
        self.xbar = data.items.mean(axis=0)
        self.sumsq = float(np.sum(data.items**2))
        self.const = -0.5 * self.n * model.M * model.N * LOG_2PI

    def logp(self, theta):
        W = self.model.product(theta)
        cross = np.sum(W * self.xbar, axis=(1, 2))
        ww = np.sum(W * W, axis=(1, 2))
        return -0.5 * (self.sumsq - 2.0 * self.n * cross + self.n * ww) + self.const

    def grad(self, theta):
        A, B = self.model.unpack(theta)
        G = self.n * (self.xbar - A @ B)
        gA = G @ np.swapaxes(B, 1, 2)
        gB = np.swapaxes(A, 1, 2) @ G
        return np.concatenate([gA.reshape(len(theta), -1), gB.reshape(len(theta), -1)], axis=1)


def low_rank_factors(W: np.ndarray, H: int):
    """Rank-``H`` truncated SVD factors ``(A, B)`` with ``AB`` the best approximation."""
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    k = min(H, s.size)
    A = np.zeros((W.shape[0], H))
    B = np.zeros((H, W.shape[1]))
    root = np.sqrt(s[:k])
    A[:, :k] = U[:, :k] * root
    B[:k] = root[:, None] * Vt[:k]
    return A, B


def mf_truth(M: int, N: int, diag_values, H: int | None = None, rho: float = 10.0, mu: float = 10.0) -> Truth:
    """Gaussian truth ``q(X) = N(X; diag(values), I)``, realizable by an ``H``-rank model.

    ``H`` defaults to the number of nonzero diagonal values. The truth's log
    density is evaluated through the model at the embedded ``theta0``.
    """
    diag_values = np.asarray(diag_values, dtype=float)
    W0 = np.zeros((M, N))
    W0[np.arange(diag_values.size), np.arange(diag_values.size)] = diag_values
    H0 = int(np.count_nonzero(diag_values))
    model = MatrixFactorization(M, N, H if H is not None else max(H0, 1), rho, mu)
    theta0 = model.embed(W0)
    theta0.setflags(write=False)

    def sampler(m, rng):
        return W0[None] + rng.standard_normal((m, M, N))

    return Truth(model=model, theta0=theta0, entropy=0.5 * M * N * (1.0 + LOG_2PI), sampler=sampler)


def mf_mle(model: MatrixFactorization, data: Dataset):
    """Maximum likelihood estimate via truncated SVD of the sample mean; returns ``(theta_hat, L_n)``."""
    A, B = low_rank_factors(data.items.mean(axis=0), model.H)
    theta = model.pack(A, B)
    return theta, empirical_log_loss(model, data, theta)
