"""Model, truth and dataset abstractions shared by every other module.

Observations are stored as one stacked ``numpy`` array of shape
``(n, *obs_shape)``. Models are evaluated in batch: ``theta`` is a
``(S, d)`` array of flat parameters and pointwise log-likelihoods come back
as an ``(S, n)`` matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when an operation is asked for something that is not defined."""


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable sample ``x^n`` of fixed-shape observations."""

    items: np.ndarray

    def __post_init__(self):
        arr = np.array(self.items, dtype=float)
        if arr.ndim == 0:
            raise DomainError("dataset items must be a sequence of observations")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1))[0])
            raise DomainError(f"non-finite observation at index {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "items", arr)

    @property
    def n(self) -> int:
        return int(self.items.shape[0])

    @property
    def shape(self) -> tuple:
        return tuple(self.items.shape[1:])

    def __len__(self):
        return self.n

    def split(self, n1: int) -> tuple["Dataset", "Dataset"]:
        """Prefix/suffix partition ``(X^{n1}, X^{n2})`` preserving order."""
        if not 0 < n1 < self.n:
            raise DomainError(f"split point {n1} outside 1..{self.n - 1}")
        return Dataset(self.items[:n1]), Dataset(self.items[n1:])

    def without(self, i: int) -> "Dataset":
        """Leave-one-out view ``X^n \\ X_i`` built from an index mask."""
        mask = np.ones(self.n, dtype=bool)
        mask[i] = False
        return Dataset(self.items[mask])

    def to_json(self) -> str:
        return json.dumps(
            {"shape": list(self.shape), "items": self.items.reshape(self.n, -1).tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        obj = json.loads(text)
        shape = tuple(obj["shape"])
        items = np.asarray(obj["items"], dtype=float)
        return cls(items.reshape((len(items),) + shape))


class Model:
    """A statistical model ``p(x|theta)`` together with its prior.

    Subclasses implement :meth:`loglik_pointwise` and :meth:`log_prior`.
    Gradients are optional; when :attr:`has_gradient` is true the sampler may
    use a Langevin proposal.
    """

    name = "model"
    dim: int = 0
    proper_prior: bool = True
    has_gradient: bool = False

    def loglik_pointwise(self, theta: np.ndarray, items: np.ndarray) -> np.ndarray:
        """Return ``log p(X_i|theta_s)`` as an ``(S, n)`` matrix."""
        raise NotImplementedError

    def log_prior(self, theta: np.ndarray) -> np.ndarray:
        """Log prior density in flat coordinates, Jacobian included; shape ``(S,)``."""
        raise NotImplementedError

    def grad_log_prior(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_prior(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def bind(self, data: Dataset) -> "BoundLikelihood":
        """Return the total log-likelihood of ``data`` as a function of theta."""
        return BoundLikelihood(self, data)

    def log_density(self, items: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Pointwise log density at a single flat parameter; shape ``(n,)``."""
        return self.loglik_pointwise(np.atleast_2d(theta), items)[0]


class BoundLikelihood:
    """Total log-likelihood ``sum_i log p(X_i|theta)`` for a fixed dataset.

    The generic version sums pointwise terms; models with sufficient
    statistics override :meth:`Model.bind` with something cheaper.
    """

    def __init__(self, model: Model, data: Dataset):
        self.model = model
        self.items = data.items
        self.n = data.n

    def logp(self, theta: np.ndarray) -> np.ndarray:
        return self.model.loglik_pointwise(theta, self.items).sum(axis=1)

    def grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Truth:
    """Simulated data-generating distribution ``q(x)``.

    ``model``/``theta0`` are set when ``q`` is realizable; the log density is
    then evaluated through the model itself so that ``L_n(theta0) == S_n``
    holds bit for bit.
    """

    model: Optional[Model] = None
    theta0: Optional[np.ndarray] = None
    entropy: Optional[float] = None
    sampler: Optional[object] = field(default=None, repr=False)
    log_density_fn: Optional[object] = field(default=None, repr=False)
    conditional: Optional[object] = field(default=None, repr=False)

    @property
    def realizable(self) -> bool:
        return self.model is not None and self.theta0 is not None

    def sample(self, m: int, rng: np.random.Generator) -> Dataset:
        if self.sampler is None:
            raise DomainError("truth cannot generate samples")
        return Dataset(self.sampler(m, rng))

    def log_density(self, items: np.ndarray) -> np.ndarray:
        if self.log_density_fn is not None:
            return np.asarray(self.log_density_fn(items), dtype=float)
        if self.realizable:
            return self.model.log_density(items, self.theta0)
        raise DomainError("truth has no log density")

    def log_loss_L0(self, model: Optional[Model] = None):
        """``L_0`` of ``model``; equals the entropy when ``q`` is realizable by it."""
        if self.realizable and (model is None or model is self.model):
            if self.entropy is None:
                raise DomainError("entropy of realizable truth is unknown")
            return self.entropy
        raise DomainError("L_0 is only available for the realizing model")


def _check_finite(values: np.ndarray, what: str) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DomainError(f"non-finite {what} at observation index {int(bad[0])}")
    return values


def empirical_entropy(truth: Truth, data: Dataset) -> float:
    """``S_n = -(1/n) sum_i log q(X_i)``."""
    if data.n == 0:
        raise DomainError("empty dataset")
    logq = _check_finite(truth.log_density(data.items), "true log density")
    return float(-np.mean(logq))


def empirical_log_loss(model: Model, data: Dataset, theta: Sequence[float]) -> float:
    """``L_n(theta) = -(1/n) sum_i log p(X_i|theta)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise DomainError(f"parameter has shape {theta.shape}, model dimension is {model.dim}")
    logp = _check_finite(model.log_density(data.items, theta), "log density")
    return float(-np.mean(logp))
