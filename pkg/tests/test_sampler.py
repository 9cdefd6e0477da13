import numpy as np
import pytest
from scipy.special import expit

from bayes_eval.core import Dataset, DomainError, Model
from bayes_eval.criteria import batch_standard_error, wbic_from_draws
from bayes_eval.diagnostics import ess, rhat
from bayes_eval.sampler import (
    GIBBS,
    LANGEVIN,
    PosteriorDraws,
    SamplerConfig,
    SamplerError,
    posterior_functionals,
    sample_tempered,
)
from bayes_eval.zoo import BernoulliBeta, MatrixFactorization, NormalLocation, mf_truth

FAST = SamplerConfig(chains=4, burn_in=1000, draws_per_chain=2500, seed=11)


class ConstantModel(Model):
    """``p(x|theta) = c`` with a standard normal prior."""

    name = "constant"
    dim = 1

    def __init__(self, c=0.5):
        self.c = c

    def loglik_pointwise(self, theta, items):
        return np.full((np.atleast_2d(theta).shape[0], len(items)), np.log(self.c))

    def log_prior(self, theta):
        t = np.atleast_2d(theta)[:, 0]
        return -0.5 * t**2 - 0.5 * np.log(2 * np.pi)

    def sample_prior(self, rng, size):
        return rng.standard_normal((size, 1))


def _mean_se(draws, f):
    return batch_standard_error(draws, lambda d: float(np.mean(f(d.theta))))


def test_bernoulli_posterior_mean():
    draws = sample_tempered(BernoulliBeta(), Dataset([1.0, 0.0, 1.0]), FAST)
    theta = expit(draws.theta[:, 0])
    se = _mean_se(draws, lambda t: expit(t[:, 0]))
    assert abs(theta.mean() - 3 / 5) < 3 * se + 1e-3
    # the conjugate Beta(3,2) posterior has mean 3/5; 4/6 is the mean of Beta(4,2) for {1,1,0,1}
    draws4 = sample_tempered(BernoulliBeta(), Dataset([1.0, 1.0, 0.0, 1.0]), FAST)
    se4 = _mean_se(draws4, lambda t: expit(t[:, 0]))
    assert abs(expit(draws4.theta[:, 0]).mean() - 4 / 6) < 3 * se4 + 1e-3


def test_constant_likelihood_leaves_prior():
    draws = sample_tempered(ConstantModel(0.5), Dataset(np.zeros(7)), FAST.replace(beta=0.3))
    se = _mean_se(draws, lambda t: t[:, 0])
    assert abs(draws.theta.mean()) < 4 * se
    assert abs(draws.theta.var() - 1.0) < 0.1
    assert np.allclose(-draws.loglik.mean(axis=1), -np.log(0.5))


@pytest.mark.parametrize("proposal", ["random-walk", LANGEVIN, GIBBS])
def test_tempered_normal_location_variance(proposal):
    rng = np.random.default_rng(5)
    data = Dataset(rng.normal(0.7, 1.0, 50))
    model = NormalLocation(tau=1.0, m0=0.0, tau0=1.0)
    beta = 1.0 / np.log(data.n)
    draws = sample_tempered(model, data, FAST.replace(beta=beta, proposal=proposal))
    mean, prec = model.posterior(data, beta)
    assert abs(draws.theta.mean() - mean) < 4 * _mean_se(draws, lambda t: t[:, 0])
    # variance check: relative error of a variance estimate from about ESS effective draws
    v = draws.theta.var(ddof=1)
    n_eff = float(np.min(draws.ess))
    assert abs(v * prec - 1.0) < 4 * np.sqrt(2.0 / n_eff)


def test_determinism_bitwise():
    data = Dataset(np.random.default_rng(0).normal(size=30))
    a = sample_tempered(NormalLocation(), data, FAST)
    b = sample_tempered(NormalLocation(), data, FAST)
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.loglik, b.loglik)


def test_seed_changes_draws():
    data = Dataset(np.random.default_rng(0).normal(size=30))
    a = sample_tempered(NormalLocation(), data, FAST)
    b = sample_tempered(NormalLocation(), data, FAST.replace(seed=12))
    assert not np.array_equal(a.theta, b.theta)


def test_chain_blocks_depend_only_on_chain_index():
    data = Dataset(np.random.default_rng(0).normal(size=30))
    two = sample_tempered(NormalLocation(), data, FAST.replace(chains=2))
    four = sample_tempered(NormalLocation(), data, FAST.replace(chains=4))
    per = FAST.draws_per_chain
    assert np.array_equal(two.theta, four.theta[: 2 * per])


def test_temperature_monotonicity():
    data = Dataset(np.random.default_rng(1).normal(0.5, 1.0, 40))
    model = NormalLocation()
    vals, ses = [], []
    for k, beta in enumerate([0.05, 0.2, 0.5, 1.0]):
        d = sample_tempered(model, data, FAST.replace(beta=beta, seed=100 + k))
        vals.append(wbic_from_draws(d))
        ses.append(batch_standard_error(d, wbic_from_draws))
    for i in range(len(vals) - 1):
        assert vals[i + 1] <= vals[i] + 2 * np.hypot(ses[i], ses[i + 1])


def test_stuck_sampler_raises():
    class Spike(NormalLocation):
        def log_prior(self, theta):
            t = np.atleast_2d(theta)[:, 0]
            return np.where(np.abs(t - 0.3) < 1e-12, 0.0, -np.inf)

        def sample_prior(self, rng, size):
            return np.full((size, 1), 0.3)

    with pytest.raises(SamplerError, match="stuck"):
        sample_tempered(Spike(), Dataset([0.0]), SamplerConfig(burn_in=50, draws_per_chain=100))


def test_bad_init_raises():
    class Nowhere(NormalLocation):
        proper_prior = False

        def log_prior(self, theta):
            return np.full(np.atleast_2d(theta).shape[0], -np.inf)

    with pytest.raises(SamplerError, match="bad init"):
        sample_tempered(Nowhere(), Dataset([0.0]), SamplerConfig(burn_in=10, draws_per_chain=10))


def test_config_validation():
    with pytest.raises(DomainError):
        SamplerConfig(beta=0.0)
    with pytest.raises(DomainError):
        SamplerConfig(proposal="hmc")
    with pytest.raises(DomainError):
        sample_tempered(NormalLocation(), Dataset(np.empty(0)), FAST)


def test_single_draw_variance_refused():
    d = PosteriorDraws(np.zeros((1, 1)), np.array([[-1.0, -2.0]]), 1.0, 1, np.ones(1), np.ones(1), np.ones(1))
    with pytest.raises(DomainError):
        posterior_functionals(d)


def test_identical_rows_give_zero_variance():
    ll = np.tile(np.array([[-1.0, -2.0, -0.5]]), (10, 1))
    d = PosteriorDraws(np.zeros((10, 1)), ll, 1.0, 1, np.ones(1), np.ones(1), np.ones(1))
    _, var = posterior_functionals(d)
    assert np.all(var == 0.0)


def test_gibbs_matrix_factorization_recovers_product():
    truth = mf_truth(4, 4, [1.0, 1.0], H=2)
    data = truth.sample(400, np.random.default_rng(2))
    model = truth.model
    d = sample_tempered(model, data, SamplerConfig(chains=2, burn_in=300, draws_per_chain=300, proposal=GIBBS))
    W = np.mean([model.product(t) for t in d.theta], axis=0)
    assert np.abs(W - np.diag([1.0, 1.0, 0, 0])).max() < 0.2


def test_langevin_needs_gradient():
    with pytest.raises(DomainError, match="gradient"):
        sample_tempered(ConstantModel(), Dataset([0.0]), FAST.replace(proposal=LANGEVIN))


def test_diagnostics_on_iid_chains():
    rng = np.random.default_rng(0)
    chains = rng.standard_normal((4, 1000, 2))
    assert np.all(np.abs(rhat(chains) - 1.0) < 0.01)
    assert np.all(ess(chains) > 2500)
    shifted = chains.copy()
    shifted[0] += 3.0
    assert np.all(rhat(shifted) > 1.1)


def test_write_csv(tmp_path):
    d = sample_tempered(NormalLocation(), Dataset([0.0, 1.0]), SamplerConfig(burn_in=10, draws_per_chain=5))
    path = tmp_path / "draws.csv"
    d.write_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "theta_0" and len(rows) == 1 + d.S
    assert float(rows[1]) == d.theta[0, 0]
    assert (tmp_path / "draws.csv.diagnostics.json").exists()


def test_mf_model_rejects_wrong_embed_shape():
    with pytest.raises(DomainError):
        MatrixFactorization(3, 3, 1).embed(np.zeros((2, 3)))
