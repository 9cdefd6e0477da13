import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayes_eval.core import Dataset, DomainError
from bayes_eval.criteria import batch_standard_error, loo_is, training_loss, waic
from bayes_eval.sampler import SamplerConfig, sample_tempered
from bayes_eval.zoo import (
    BernoulliBeta,
    MatrixFactorization,
    NormalMeanPrecision,
    PolyRegression,
    PolyRegressionExact,
    conjugate_posterior,
    mf_mle,
    mf_truth,
    model_from_config,
    normal_exact_fn_cn,
    normal_fn_cn,
    normal_truth,
    ols_mle,
    polyreg_truth,
)
from bayes_eval.zoo.normal import minimize_hyper


def test_mf_log_density_matches_frobenius_form():
    model = MatrixFactorization(3, 4, 2)
    rng = np.random.default_rng(0)
    theta = rng.normal(size=model.dim)
    X = rng.normal(size=(5, 3, 4))
    A, B = model.unpack(theta)
    direct = -0.5 * np.sum((X - A @ B) ** 2, axis=(1, 2)) - 6 * math.log(2 * math.pi)
    np.testing.assert_allclose(model.log_density(X, theta), direct, rtol=1e-12)


def test_mf_effective_dimension():
    assert MatrixFactorization(8, 8, 2).effective_dim == 28
    assert MatrixFactorization(8, 8, 6).effective_dim == 60


def test_mf_mle_is_truncated_svd():
    truth = mf_truth(6, 5, [3.0, 2.0], H=3)
    data = truth.sample(40, np.random.default_rng(1))
    model = truth.model
    theta, loss = mf_mle(model, data)
    Xbar = data.items.mean(axis=0)
    U, s, Vt = np.linalg.svd(Xbar)
    best = (U[:, :3] * s[:3]) @ Vt[:3]
    np.testing.assert_allclose(model.product(theta)[0], best, atol=1e-10)
    # Eckart-Young: no random rank-3 product fits the mean better
    rng = np.random.default_rng(2)
    for _ in range(20):
        other = model.product(rng.normal(size=model.dim))[0]
        assert np.sum((Xbar - other) ** 2) >= np.sum((Xbar - best) ** 2)
    assert np.isfinite(loss)


@pytest.mark.parametrize("shape", [(4, 4), (3, 5), (6, 2)])
def test_mf_embed_round_trips(shape):
    model = MatrixFactorization(*shape, 2)
    W = np.zeros(shape)
    W[0, 0], W[1, 1] = 1.5, -0.5
    np.testing.assert_allclose(model.product(model.embed(W))[0], W, atol=1e-12)


def test_mf_embed_rank_too_high():
    model = MatrixFactorization(3, 3, 1)
    with pytest.raises(DomainError):
        model.embed(np.eye(3))


def test_polyreg_properness_flag():
    assert PolyRegression(K=3, b=2.0).proper_prior
    assert not PolyRegression(K=3, b=1.5).proper_prior
    with pytest.raises(DomainError):
        PolyRegression(K=3, b=2.0, c=0.0)


def test_polyreg_mcmc_matches_conjugate():
    truth = polyreg_truth()
    data = truth.sample(30, np.random.default_rng(4))
    model = PolyRegression(K=3, b=2.0)
    draws = sample_tempered(model, data, SamplerConfig(chains=4, burn_in=1000, draws_per_chain=4000, seed=5, proposal="gibbs"))
    post = conjugate_posterior(model, data)
    for j in range(3):
        se = batch_standard_error(draws, lambda d, j=j: float(d.theta[:, j].mean()))
        assert abs(draws.theta[:, j].mean() - post.mean[j]) < 3 * se + 1e-3
    exact = PolyRegressionExact(model, data)
    for stat, oracle in ((training_loss, exact.training_loss()), (waic, exact.waic()), (loo_is, exact.loo())):
        se = batch_standard_error(draws, stat)
        assert abs(stat(draws) - oracle) < 3 * se + 2e-3


def test_polyreg_exact_loo_matches_refits():
    truth = polyreg_truth()
    data = truth.sample(12, np.random.default_rng(6))
    model = PolyRegression(K=3, b=2.0)
    ex = PolyRegressionExact(model, data)
    manual = []
    for i in range(data.n):
        rest = conjugate_posterior(model, data.without(i))
        x, y = data.items[i]
        manual.append(-rest.predictive_logpdf(np.array([x]), np.array([y]))[0])
    assert ex.loo() == pytest.approx(np.mean(manual), rel=1e-10)


def test_polyreg_improper_free_energy_refused():
    data = polyreg_truth().sample(20, np.random.default_rng(0))
    ex = PolyRegressionExact(PolyRegression(K=3, b=1.0), data)
    with pytest.raises(DomainError, match="infinite"):
        ex.free_energy()
    assert np.isfinite(ex.loo())


def test_ols_mle_recovers_coefficients():
    truth = polyreg_truth(a0=(1.0, -0.2), s0=25.0)
    data = truth.sample(5000, np.random.default_rng(1))
    theta, _ = ols_mle(PolyRegression(K=2), data)
    np.testing.assert_allclose(theta[:2], [1.0, -0.2], atol=0.02)
    assert math.exp(theta[2]) == pytest.approx(25.0, rel=0.05)


def test_normal_closed_form_has_interior_minimizers():
    data = normal_truth().sample(2000, np.random.default_rng(0))
    grid = np.geomspace(0.05, 20, 200)
    f = np.array([normal_fn_cn(data, a)[0] for a in grid])
    c = np.array([normal_fn_cn(data, a)[1] for a in grid])
    # derivative changes sign once inside the grid
    assert np.diff(f)[0] < 0 < np.diff(f)[-1]
    assert np.diff(c)[0] < 0 < np.diff(c)[-1]


def test_normal_closed_form_exponent_gap():
    # the closed form carries (n+1)/2 where the normalized evidence carries n/2 + 1
    data = normal_truth().sample(300, np.random.default_rng(3))
    x = data.items.reshape(-1)
    n, A, B = x.size, float(np.sum(x**2)), float(np.sum(x))
    gap = []
    for a in (1.0, 3.0):
        f, _ = normal_fn_cn(data, a)
        e, _ = normal_exact_fn_cn(data, a)
        gap.append(e - f - 0.5 * math.log((A + a) * (n + 1) - B**2))
    assert gap[0] == pytest.approx(gap[1], abs=1e-8)


def test_normal_exact_loo_matches_mcmc():
    data = normal_truth(0.3, 1.2).sample(40, np.random.default_rng(2))
    model = NormalMeanPrecision(2.0)
    draws = sample_tempered(model, data, SamplerConfig(chains=4, burn_in=2000, draws_per_chain=5000, seed=1))
    _, c_exact = normal_exact_fn_cn(data, 2.0)
    se = batch_standard_error(draws, loo_is)
    assert abs(loo_is(draws) - c_exact) < 3 * se + 5e-3


def test_normal_hyper_must_be_positive():
    with pytest.raises(DomainError):
        normal_fn_cn(Dataset([0.0, 1.0]), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(-3, 3))
def test_minimize_hyper_finds_quadratic_minimum(a0, shift):
    fun = lambda a: (math.log(a) - math.log(a0)) ** 2 + shift
    assert minimize_hyper(fun) == pytest.approx(a0, rel=1e-3)


def test_model_from_config():
    m = model_from_config({"model": "matrix_factorization", "M": 8, "N": 8, "H": 2})
    assert isinstance(m, MatrixFactorization) and m.dim == 32
    assert isinstance(model_from_config({"model": "bernoulli-beta"}), BernoulliBeta)
    with pytest.raises(DomainError, match="unknown model"):
        model_from_config({"model": "mixture"})
    with pytest.raises(DomainError, match="unknown keys"):
        model_from_config({"model": "polyreg", "Q": 1})


def test_truth_entropies():
    assert normal_truth(0.0, 2.0).entropy == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 4.0))
    t = polyreg_truth(s0=25.0)
    assert t.entropy == pytest.approx(0.5 * math.log(2 * math.pi * math.e / 25.0))
