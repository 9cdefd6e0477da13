"""Concrete models and truths used by the experiments and tests."""

from ..core import DomainError
from .bernoulli import BernoulliBeta, BernoulliBetaExact, bernoulli_truth
from .matrix_factorization import MatrixFactorization, mf_mle, mf_truth
from .normal import NormalLocation, NormalMeanPrecision, normal_exact_fn_cn, normal_fn_cn, normal_truth
from .polyreg import PolyRegression, PolyRegressionExact, conjugate_posterior, ols_mle, polyreg_truth

_REGISTRY = {
    "matrix_factorization": (MatrixFactorization, {"M", "N", "H", "rho", "mu"}),
    "bernoulli_beta": (BernoulliBeta, {"alpha", "beta0"}),
    "polynomial_regression": (PolyRegression, {"K", "b", "c", "d"}),
    "normal_location": (NormalLocation, {"tau", "m0", "tau0"}),
    "normal_mean_precision": (NormalMeanPrecision, {"a"}),
}
_ALIASES = {"bernoulli-beta": "bernoulli_beta", "matrix-factorization": "matrix_factorization",
            "polyreg": "polynomial_regression", "polynomial-regression": "polynomial_regression"}


def model_from_config(cfg: dict):
    """Build a model from a JSON fragment such as ``{"model": "matrix_factorization", "M": 8, ...}``."""
    cfg = dict(cfg)
    name = cfg.pop("model", None)
    name = _ALIASES.get(name, name)
    if name not in _REGISTRY:
        raise DomainError(f"unknown model {name!r}")
    cls, keys = _REGISTRY[name]
    unknown = set(cfg) - keys
    if unknown:
        raise DomainError(f"unknown keys for {name}: {sorted(unknown)}")
    return cls(**cfg)


__all__ = [
    "BernoulliBeta", "BernoulliBetaExact", "bernoulli_truth",
    "MatrixFactorization", "mf_mle", "mf_truth",
    "NormalLocation", "NormalMeanPrecision", "normal_fn_cn", "normal_exact_fn_cn", "normal_truth",
    "PolyRegression", "PolyRegressionExact", "conjugate_posterior", "ols_mle", "polyreg_truth",
    "model_from_config",
]
