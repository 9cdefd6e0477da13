import numpy as np
import pytest

from bayes_eval.core import DomainError
from bayes_eval.rlct import RLCTSpec, rlct_reduced_rank, rlct_regular, rlct_volume_estimate

EPS = np.geomspace(1e-2, 1e-4, 8)


def _uniform(dim):
    return lambda rng, m: rng.uniform(-1.0, 1.0, (m, dim))


def test_pinned_reduced_rank_values():
    assert rlct_reduced_rank(8, 8, 2, 2).lambda_ == 14
    assert rlct_reduced_rank(8, 8, 6, 2).lambda_ == 24
    assert rlct_reduced_rank(8, 8, 6, 2).multiplicity == 1


@pytest.mark.parametrize("M", range(1, 11))
def test_boundary_is_half_effective_dimension(M):
    for H in range(1, M + 1):
        assert rlct_reduced_rank(M, M, H, H).lambda_ == (2 * M * H - H * H) / 2


def test_monotone_in_H():
    vals = [rlct_reduced_rank(8, 8, H, 2).lambda_ for H in range(2, 7)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_unsupported_regime_is_loud():
    with pytest.raises(DomainError, match="unsupported regime"):
        rlct_reduced_rank(2, 12, 3, 0)
    with pytest.raises(DomainError):
        rlct_reduced_rank(8, 8, 2, 3)


def test_regular_rule():
    assert rlct_regular(28).lambda_ == 14.0
    with pytest.raises(DomainError):
        rlct_regular(0)


def test_spec_validation():
    with pytest.raises(DomainError):
        RLCTSpec(0.0, 1, "user")
    with pytest.raises(DomainError):
        RLCTSpec(1.0, 0, "user")


def test_volume_one_dimensional_square():
    spec = rlct_volume_estimate(lambda t: t[:, 0] ** 2, _uniform(1), EPS, seed=1)
    assert abs(spec.lambda_ - 0.5) < 0.1
    assert spec.multiplicity == 1 and spec.low_confidence


def test_volume_singular_product():
    spec = rlct_volume_estimate(lambda t: t[:, 0] ** 2 * t[:, 1] ** 2, _uniform(2), EPS, seed=2)
    assert abs(spec.lambda_ - 0.5) < 0.1
    assert spec.multiplicity == 2


def test_volume_slope_only_is_biased_on_singular_loss():
    spec = rlct_volume_estimate(lambda t: t[:, 0] ** 2 * t[:, 1] ** 2, _uniform(2), EPS, seed=2, fit="slope")
    assert spec.multiplicity == 1 and spec.lambda_ < 0.45


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_volume_regular_quadratics(d):
    eps = EPS if d <= 2 else np.geomspace(0.3, 3e-2, 8)
    spec = rlct_volume_estimate(lambda t: np.sum(t**2, axis=1), _uniform(d), eps, seed=10 + d)
    assert abs(spec.lambda_ - d / 2) < 0.15
    assert spec.multiplicity == 1


def test_volume_insufficient_resolution():
    with pytest.raises(DomainError, match="insufficient resolution"):
        rlct_volume_estimate(lambda t: np.sum(t**2, axis=1), _uniform(6), EPS, samples=10_000)


def test_volume_grid_checked():
    with pytest.raises(DomainError):
        rlct_volume_estimate(lambda t: t[:, 0] ** 2, _uniform(1), [1e-4, 1e-3, 1e-2, 1e-1])
