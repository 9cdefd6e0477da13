import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import betaln
from scipy.stats import beta as beta_dist

from bayes_eval.core import Dataset, DomainError
from bayes_eval.criteria import (
    ImportanceWeightWarning,
    OracleNoiseWarning,
    acv,
    batch_standard_error,
    dic,
    error_report,
    functional_variance,
    gen_loss,
    holdout,
    loo_exact,
    loo_is,
    plugin_criteria,
    ti_free_energy,
    training_loss,
    waic,
    wbic,
)
from bayes_eval.sampler import PosteriorDraws, SamplerConfig, sample_tempered
from bayes_eval.zoo import (
    BernoulliBeta,
    BernoulliBetaExact,
    NormalLocation,
    PolyRegression,
    PolyRegressionExact,
    bernoulli_truth,
    polyreg_truth,
)
from bayes_eval.zoo.bernoulli import expected_free_energy, expected_gen_loss

CFG = SamplerConfig(chains=4, burn_in=1000, draws_per_chain=5000, seed=3)
DATA = Dataset([1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0])


def _draws(ll, theta=None, beta=1.0):
    ll = np.asarray(ll, dtype=float)
    theta = np.zeros((ll.shape[0], 1)) if theta is None else theta
    return PosteriorDraws(theta, ll, beta, 1, np.ones(1), np.ones(1), np.ones(1))


@pytest.fixture(scope="module")
def bern():
    return sample_tempered(BernoulliBeta(), DATA, CFG), BernoulliBetaExact(DATA)


def _within(draws, stat, target, k=3.0, floor=2e-3):
    se = batch_standard_error(draws, stat)
    assert abs(stat(draws) - target) < k * se + floor


def test_training_loss_oracle(bern):
    d, ex = bern
    _within(d, training_loss, ex.training_loss())


def test_waic_oracle(bern):
    d, ex = bern
    _within(d, waic, ex.waic())


def test_loo_oracle(bern):
    d, ex = bern
    _within(d, loo_is, ex.loo())


def test_dic_oracle(bern):
    d, ex = bern
    _within(d, lambda x: dic(x, BernoulliBeta(), DATA), ex.dic())


def test_holdout_oracle(bern):
    d, ex = bern
    test = Dataset([0.0, 1.0, 0.0])
    _within(d, lambda x: holdout(x, test, BernoulliBeta()), ex.holdout(test.items))


def test_predictive_two_thirds():
    d = sample_tempered(BernoulliBeta(), Dataset([1.0, 0.0, 1.0]), CFG)
    # predictive p(1|X^3) = 3/5 under the uniform prior; its log is the loss of the held-out "1"
    _within(d, lambda x: holdout(x, Dataset([1.0]), BernoulliBeta()), -math.log(3 / 5))


def test_loo_exact_matches_importance_sampling():
    data = Dataset([1.0, 0.0, 1.0, 1.0])
    cfg = SamplerConfig(chains=4, burn_in=500, draws_per_chain=4000, seed=8)
    exact = BernoulliBetaExact(data).loo()
    assert loo_exact(BernoulliBeta(), data, cfg) == pytest.approx(exact, abs=0.02)
    assert loo_is(sample_tempered(BernoulliBeta(), data, cfg)) == pytest.approx(exact, abs=0.02)


def test_gen_loss_oracle(bern):
    d, ex = bern
    truth = bernoulli_truth(0.3)
    g = gen_loss(d, BernoulliBeta(), truth, 4000, np.random.default_rng(0))
    assert g == pytest.approx(ex.gen_loss(0.3), abs=0.01)


def test_gen_loss_warns_on_tiny_test_set(bern):
    d, _ = bern
    with pytest.warns(OracleNoiseWarning):
        gen_loss(d, BernoulliBeta(), bernoulli_truth(0.3), 10, np.random.default_rng(0))


def test_waic_minus_training_is_functional_variance_exactly():
    rng = np.random.default_rng(0)
    d = _draws(rng.normal(-2.0, 0.4, (500, 25)))
    lhs = d.n * (waic(d) - training_loss(d))
    rhs = functional_variance(d).V
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.filterwarnings("ignore::bayes_eval.criteria.ImportanceWeightWarning")
@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 40), st.integers(1, 12)), elements=st.floats(-50, 0)))
def test_criteria_ordering_properties(ll):
    d = _draws(ll)
    T, W, C = training_loss(d), waic(d), loo_is(d)
    assert W >= T - 1e-9
    # Jensen: log E[1/p] >= -log E[p]
    assert C >= T - 1e-9
    assert np.isfinite([T, W, C]).all()


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(1, 50), st.integers(1, 50))
def test_acv_is_convex_combination(c, h, n1, n2):
    a = acv(c, h, n1, n2)
    assert min(c, h) - 1e-12 <= a <= max(c, h) + 1e-12


def test_large_loglik_stays_finite():
    rng = np.random.default_rng(1)
    d = _draws(rng.normal(-900.0, 3.0, (200, 5)))
    assert np.isfinite([training_loss(d), waic(d), loo_is(d)]).all()


def test_degenerate_posterior_collapses_criteria():
    ll = np.tile(np.array([[-1.0, -2.0, -0.5]]), (10, 1))
    d = _draws(ll, theta=np.zeros((10, 1)))
    T = training_loss(d)
    assert waic(d) == pytest.approx(T, abs=1e-14)
    assert loo_is(d) == pytest.approx(T, abs=1e-14)
    assert T == pytest.approx(7 / 6, abs=1e-14)


def test_dic_degenerate_equals_training_loss():
    data = Dataset([1.0, 0.0, 1.0])
    theta = np.zeros((5, 1))
    d = _draws(BernoulliBeta().loglik_pointwise(theta, data.items), theta=theta)
    assert dic(d, BernoulliBeta(), data) == pytest.approx(training_loss(d), abs=1e-14)


def test_tempered_draws_rejected():
    d = _draws(np.zeros((3, 2)), beta=0.5)
    for f in (training_loss, waic, loo_is):
        with pytest.raises(DomainError, match="beta = 1"):
            f(d)


def test_waic_needs_two_draws():
    with pytest.raises(DomainError):
        waic(_draws(np.zeros((1, 3))))


def test_importance_weight_warning():
    ll = np.zeros((50, 2))
    ll[0, 0] = -60.0
    with pytest.warns(ImportanceWeightWarning, match=r"\[0\]"):
        loo_is(_draws(ll))


def test_acv_rejects_empty_split():
    with pytest.raises(DomainError):
        acv(1.0, 1.0, 0, 3)


def test_wbic_needs_n_at_least_three():
    with pytest.raises(DomainError):
        wbic(NormalLocation(), Dataset([0.0, 1.0]), CFG)


def test_wbic_constant_likelihood():
    from test_sampler import ConstantModel

    data = Dataset(np.zeros(9))
    assert wbic(ConstantModel(0.25), data, CFG) == pytest.approx(-9 * math.log(0.25), abs=1e-12)


def test_ti_recovers_log_twelve():
    cfg = SamplerConfig(chains=2, burn_in=500, draws_per_chain=3000, seed=4)
    f = ti_free_energy(BernoulliBeta(), Dataset([1.0, 0.0, 1.0]), cfg, beta_grid=np.linspace(0.05, 1.0, 20))
    assert f == pytest.approx(math.log(12), abs=0.05)


def test_ti_constant_likelihood():
    from test_sampler import ConstantModel

    cfg = SamplerConfig(chains=1, burn_in=100, draws_per_chain=200, seed=4)
    f = ti_free_energy(ConstantModel(0.5), Dataset(np.zeros(6)), cfg, beta_grid=np.array([0.3, 1.0]))
    assert f == pytest.approx(-6 * math.log(0.5), abs=1e-12)


def test_ti_refuses_improper_prior():
    with pytest.raises(DomainError, match="infinite"):
        ti_free_energy(PolyRegression(K=3, b=1.0), Dataset(np.zeros((4, 2))), CFG)


def test_ti_grid_validated():
    with pytest.raises(DomainError):
        ti_free_energy(BernoulliBeta(), DATA, CFG, beta_grid=np.array([0.5, 0.2]))


def test_expected_gen_loss_is_free_energy_increment():
    for n in (1, 5, 40):
        for p in (0.2, 0.5, 0.9):
            lhs = expected_gen_loss(n, p)
            rhs = expected_free_energy(n + 1, p) - expected_free_energy(n, p)
            assert lhs == pytest.approx(rhs, abs=1e-8)


def test_prior_shift_law_bounded():
    rng = np.random.default_rng(0)
    a1, b1 = 3.0, 2.0
    for n in (50, 200, 800):
        x = (rng.random(n) < 0.35).astype(float)
        k = x.sum()
        f0 = -(betaln(1 + k, 1 + n - k) - betaln(1, 1))
        f1 = -(betaln(a1 + k, b1 + n - k) - betaln(a1, b1))
        mle = k / n
        shift = f1 - f0 + math.log(beta_dist.pdf(mle, a1, b1) / beta_dist.pdf(mle, 1, 1))
        assert abs(shift) < 0.5


def test_loo_waic_equivalent_in_higher_order_across_priors():
    truth = polyreg_truth()
    ratios = []
    for s in range(15):
        d = truth.sample(200, np.random.default_rng(s))
        e0 = PolyRegressionExact(PolyRegression(K=3, b=2.0), d)
        e1 = PolyRegressionExact(PolyRegression(K=3, b=6.0), d)
        dC, dW = e1.loo() - e0.loo(), e1.waic() - e0.waic()
        ratios.append(abs(dC - dW) / abs(dC))
    assert np.median(ratios) < 0.1


def test_plugin_identities():
    out = plugin_criteria(1.5, 28, 14.0, 200)
    assert out["AFE"] - out["BIC"] == pytest.approx((14.0 - 14.0) * math.log(200))
    out = plugin_criteria(1.5, 60, 24.0, 200)
    assert out["AFE"] - out["BIC"] == pytest.approx((24.0 - 30.0) * math.log(200))
    assert out["AIC"] == pytest.approx(1.5 + 60 / 200)
    assert out["sBIC"] == out["AFE"]


def test_plugin_rejects_nonfinite():
    with pytest.raises(DomainError):
        plugin_criteria(float("inf"), 2, 1.0, 10)


def test_error_report_all_zero_at_entropy():
    S = 1.3
    vals = {k: S for k in ("G_n", "C_n", "W_n", "A_n", "H_n2", "AIC", "DIC")}
    vals.update({k: 10 * S for k in ("BIC", "WBIC", "AFE")})
    rep = error_report(vals, S_n=S, S=S, S_n2=S, n=10, n1=5, n2=5)
    assert all(v == 0.0 for v in rep.errors.values())
    assert len(rep.errors) == 10


def test_error_report_split_scaling_and_entropy():
    rep = error_report({"A_n": 2.0, "H_n2": 3.0}, S_n=1.0, S_n2=1.5, n=10, n1=4, n2=6)
    assert rep.errors["AC.E."] == pytest.approx(0.4 * 1.0)
    assert rep.errors["HO.E."] == pytest.approx(0.4 * 1.5)


def test_error_report_names_missing_ingredient():
    with pytest.raises(DomainError, match="G_n"):
        error_report({"C_n": 1.0}, S_n=1.0, n=5, requested=["GE.E."])


def test_report_json_omits_absent_values():
    rep = error_report({"C_n": 1.0, "WBIC": 20.0}, S_n=0.5, n=10)
    out = rep.to_dict()
    assert "W_n" not in out and out["WBIC/n"] == 2.0 and out["LOO.E."] == 0.5
