"""Real log canonical thresholds: regular rule, reduced-rank values, volume estimate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DomainError

REGULAR = "regular"
REDUCED_RANK = "reduced-rank"
VOLUME = "volume-estimate"
USER = "user"


@dataclass(frozen=True)
class RLCTSpec:
    lambda_: float
    multiplicity: int = 1
    provenance: str = USER
    low_confidence: bool = False

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise DomainError("RLCT must be positive")
        if self.multiplicity < 1:
            raise DomainError("multiplicity must be a positive integer")

    def to_dict(self) -> dict:
        lam = self.lambda_
        out = {
            "lambda": int(lam) if float(lam).is_integer() else lam,
            "multiplicity": self.multiplicity,
            "provenance": self.provenance,
        }
        if self.low_confidence:
            out["low_confidence"] = True
        return out


def rlct_regular(d: int) -> RLCTSpec:
    if d < 1:
        raise DomainError("dimension must be >= 1")
    return RLCTSpec(d / 2, 1, REGULAR)


def rlct_reduced_rank(M: int, N: int, H: int, r: int) -> RLCTSpec:
    """RLCT of reduced-rank regression / matrix factorization.

    Implemented regimes: the balanced case ``M+r <= N+H``, ``N+r <= M+H``,
    ``H+r <= M+N`` (both parities), and the ``r = H`` boundary where the
    model is regular modulo GL(H) and ``lambda = (MH + HN - H^2)/2``.
    """
    if not 0 <= r <= min(H, M, N):
        raise DomainError(f"need 0 <= r <= min(H, M, N), got r={r}")
    if r == H:
        return RLCTSpec((M * H + H * N - H * H) / 2, 1, REDUCED_RANK)
    if M + r <= N + H and N + r <= M + H and H + r <= M + N:
        num = 2 * (H + r) * (M + N) - (M - N) ** 2 - (H + r) ** 2
        if (M + N + H + r) % 2 == 0:
            return RLCTSpec(num / 8, 1, REDUCED_RANK)
        return RLCTSpec((num + 1) / 8, 2, REDUCED_RANK)
    raise DomainError("unsupported regime; consult reference")


def prior_hit_probabilities(loss_fn: Callable[[np.ndarray], np.ndarray], prior_sampler, eps_grid,
                            samples: int, rng: np.random.Generator, batch: int = 200_000):
    """Monte Carlo estimate of ``Prob(eps) = Pr_prior[L(theta) - L_0 < eps]`` for each eps.

    Returns ``(hits, prob, dim)`` with ``dim`` the parameter dimension seen.
    """
    eps = np.asarray(eps_grid, dtype=float)
    hits = np.zeros(eps.size, dtype=np.int64)
    done = 0
    dim = 1
    while done < samples:
        m = min(batch, samples - done)
        draws = prior_sampler(rng, m)
        dim = int(np.shape(draws)[1]) if np.ndim(draws) > 1 else 1
        k = np.asarray(loss_fn(draws), dtype=float)
        hits += np.sum(k[:, None] < eps[None, :], axis=0)
        done += m
    return hits, hits / samples, dim


def rlct_volume_estimate(loss_fn: Callable[[np.ndarray], np.ndarray], prior_sampler, eps_grid,
                         samples: int = 1_000_000, seed: int = 0, fit: str = "multiplicity") -> RLCTSpec:
    """Estimate ``lambda`` from ``Prob(eps) ~ c eps^lambda (-log eps)^(m-1)``.

    ``loss_fn`` maps an ``(m, d)`` batch of prior draws to ``L(theta) - L_0``.
    ``fit="slope"`` regresses ``log Prob`` on ``log eps`` alone and reports
    ``m = 1``. ``fit="multiplicity"`` first regresses on both ``log eps`` and
    ``log(-log eps)``, rounds the second coefficient to an integer ``m - 1 >= 0``,
    then refits the slope with that term held fixed. Without the correction the
    slope is biased low whenever ``m > 1``.
    """
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size < 4 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise DomainError("eps_grid must be strictly decreasing, positive, with at least 4 points")
    if fit not in ("slope", "multiplicity"):
        raise DomainError(f"unknown fit {fit!r}")
    rng = np.random.default_rng(seed)
    hits, prob, dim = prior_hit_probabilities(loss_fn, prior_sampler, eps, samples, rng)
    if hits[-1] < 30:
        raise DomainError(f"insufficient resolution: {int(hits[-1])} prior hits at eps={eps[-1]:g}")
    x = np.log(eps)
    y = np.log(prob)
    # binomial noise: sd(log Prob) ~ 1/sqrt(hits)
    w = np.sqrt(hits.astype(float))
    m = 1
    if fit == "multiplicity":
        if np.any(eps >= 1):
            raise DomainError("the multiplicity fit needs eps < 1")
        X = np.stack([x, np.log(-x), np.ones_like(x)], axis=1)
        Xw = X * w[:, None]
        coef, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
        se = np.sqrt(np.linalg.inv(Xw.T @ Xw)[1, 1])
        # cumulative counts are correlated, so nominal SE is optimistic; demand 6 SE
        if coef[1] > 6.0 * se:
            m = int(np.clip(round(coef[1]) + 1, 1, dim))
        y = y - (m - 1) * np.log(-x)
    slope, _ = np.polyfit(x, y, 1, w=w)
    return RLCTSpec(float(slope), m, VOLUME, low_confidence=True)
