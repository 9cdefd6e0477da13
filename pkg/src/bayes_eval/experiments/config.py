"""Experiment configuration: JSON schema, defaults, overrides and seeding."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from ..core import DomainError
from ..sampler import GIBBS, SamplerConfig


class ConfigError(DomainError):
    """Malformed or inconsistent configuration; ``key`` is the offending key path."""

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


EXPERIMENTS = ("example1", "example2", "example3", "variance", "minimizer")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)
    n: int = 200
    n1: Optional[int] = None
    n2: Optional[int] = None
    trials: int = 100
    seed: int = 0
    sampler: dict = field(default_factory=dict)
    test_size: int = 2000
    grid: Optional[list] = None
    out: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", "experiment")
        if self.trials < 2:
            raise ConfigError("trials must be >= 2", "trials")
        if self.n < 2:
            raise ConfigError("n must be >= 2", "n")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", "workers")
        if (self.n1 is None) != (self.n2 is None):
            raise ConfigError("n1 and n2 must be given together", "n1" if self.n1 is None else "n2")
        if self.n1 is not None and (self.n1 < 1 or self.n2 < 1 or self.n1 + self.n2 != self.n):
            raise ConfigError(f"need n1 + n2 = n with both positive, got {self.n1} + {self.n2} != {self.n}", "n1")
        try:
            self.sampler_config()
        except (TypeError, DomainError) as exc:
            raise ConfigError(str(exc), "sampler") from None

    @property
    def split(self) -> tuple[int, int]:
        if self.n1 is None:
            return self.n // 2, self.n - self.n // 2
        return self.n1, self.n2

    def sampler_config(self, seed: int = 0, **changes) -> SamplerConfig:
        return SamplerConfig(**{**self.sampler, "seed": seed, **changes})

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


_MF_SAMPLER = {"chains": 4, "burn_in": 1000, "draws_per_chain": 2000, "proposal": GIBBS}

_DEFAULTS = {
    "example1": dict(
        model={"model": "matrix_factorization", "M": 8, "N": 8, "H": [2, 6], "rho": 10.0, "mu": 10.0},
        truth={"diag": [1.0, 1.0]},
        n=200, n1=100, n2=100, trials=100, sampler=_MF_SAMPLER, test_size=2000,
    ),
    "example2": dict(
        model={"model": "matrix_factorization", "M": 8, "N": 8, "H": [2, 6], "rho": 10.0, "mu": 10.0},
        truth={"diag": [1.0, 1.0]},
        n=200, trials=100, sampler=_MF_SAMPLER,
    ),
    "example3": dict(
        model={"model": "polynomial_regression", "K": 3, "c": 0.01, "d": 0.01},
        truth={"a0": [1.0, -0.2, 1.0 / 30.0], "s0": 25.0, "reference": 0.5},
        n=20, n1=10, n2=10, trials=200, grid=[float(b) for b in np.arange(-3.0, 6.51, 0.5)],
    ),
    "variance": dict(
        model={"model": "polynomial_regression", "K": 2, "b": 2.0, "c": 0.01, "d": 0.01},
        truth={"a0": [1.0, -0.2], "s0": 25.0, "fisher_samples": 200_000},
        n=400, trials=500,
    ),
    "minimizer": dict(
        model={"model": "normal_mean_precision"},
        truth={"mean": 0.0, "sd": 1.0},
        n=10_000, trials=20, grid=[1e-3, 20.0],
    ),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in _DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}", "experiment")
    base = json.loads(json.dumps(_DEFAULTS[experiment]))
    return ExperimentConfig(experiment=experiment, **{**base, **overrides})


def load_config(source, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse a JSON config (path, text or dict) on top of the experiment defaults.

    Unknown top-level keys are rejected; ``overrides`` win over file values.
    """
    if isinstance(source, dict):
        obj = dict(source)
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                with open(text) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "config") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object", "config")
    obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
    if "experiment" not in obj:
        raise ConfigError("missing key 'experiment'", "experiment")
    name = obj.pop("experiment")
    if name not in _DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}", "experiment")
    base = json.loads(json.dumps(_DEFAULTS[name]))
    for key in ("model", "truth", "sampler"):
        if key in obj and not isinstance(obj[key], dict):
            raise ConfigError(f"{key} must be an object", key)
        if key in obj:
            merged = {**base.get(key, {}), **obj.pop(key)}
            base[key] = merged
    base.update(obj)
    try:
        return ExperimentConfig(experiment=name, **base)
    except TypeError as exc:
        raise ConfigError(str(exc), "config") from None


def trial_seeds(master: int, index: int, group: int = 0, count: int = 4) -> list[int]:
    """Independent integer seeds for one trial, a function of ``(master, group, index)`` only."""
    ss = np.random.SeedSequence(master, spawn_key=(group, index))
    return [int(s) for s in ss.generate_state(count)]
