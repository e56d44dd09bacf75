import math

import numpy as np
import pytest

from is2.algorithm import (
    adapt_proposal,
    exact_draws,
    particle_count,
    posterior_means,
    run_is2,
    synthetic_noise,
    tnv_curve,
    with_synthetic_noise,
)
from is2.core import coordinate, self_normalized_estimate, shifted_weights, standard_is_estimate
from is2.errors import ConfigError
from is2.proposals import ParameterProposal, fit_from_weighted_draws
from is2.rng import stream
from is2.tuning import TuningProfile

from helpers import lgss_problem, posterior_t


@pytest.fixture(scope="module")
def lgss():
    return lgss_problem()


def test_run_is_reproducible_across_threads_and_batches(lgss):
    model, post = lgss
    g = posterior_t(post)
    a = run_is2(model, g, 300, 42, fixed_n=8).draws
    b = run_is2(model, g, 300, 42, fixed_n=8, threads=3).draws
    c = run_is2(model, g, 300, 42, fixed_n=8, batch_size=7).draws
    for other in (b, c):
        np.testing.assert_array_equal(a.theta, other.theta)
        np.testing.assert_array_equal(a.log_lik_hat, other.log_lik_hat)
    d = run_is2(model, g, 300, 43, fixed_n=8).draws
    assert not np.array_equal(a.log_lik_hat, d.log_lik_hat)


def test_run_prefix_property(lgss):
    model, post = lgss
    g = posterior_t(post)
    short = run_is2(model, g, 50, 5, fixed_n=4).draws
    long = run_is2(model, g, 120, 5, fixed_n=4).draws
    np.testing.assert_array_equal(short.log_lik_hat, long.log_lik_hat[:50])


def test_run_records_metadata(lgss):
    model, post = lgss
    draws = run_is2(model, posterior_t(post), 20, 9, fixed_n=5, antithetic=True).draws
    assert np.all(draws.n_particles == 6)
    assert draws.model_id == "lgss" and draws.proposal_id == "student_t(df=5)"
    assert draws.param_names == ("atanh_phi", "log_q") and draws.master_seed == 9
    assert np.all(draws.antithetic_partner == -1)


def test_particle_count_rules(lgss):
    model, _ = lgss
    assert particle_count(model, fixed_n=7) == (7, None)
    assert particle_count(model, sigma2_target=0.5, profile=TuningProfile(10.0, 1.0)) == (20, None)
    with pytest.raises(ConfigError):
        particle_count(model)
    with pytest.raises(ConfigError):
        particle_count(model, fixed_n=3, sigma2_target=1.0)
    with pytest.raises(ConfigError):
        particle_count(model, sigma2_target=1.0)
    with pytest.raises(ConfigError):
        particle_count(model, fixed_n=0)

    class SelfTuning:
        self_tuning = True

    assert particle_count(SelfTuning(), sigma2_target=0.3) == (None, 0.3)


def test_exact_draws_reduce_to_standard_is(lgss):
    model, post = lgss
    g = posterior_t(post)
    draws = exact_draws(model, g, 500, 3)
    a = self_normalized_estimate(draws, coordinate(0))
    b = standard_is_estimate(model.log_prior(draws.theta), model.exact_loglik(draws.theta),
                             g.log_density(draws.theta), draws.theta[:, 0])
    assert a == b


def test_synthetic_noise_has_unit_mean_on_natural_scale():
    z = synthetic_noise(400_000, 1.0, stream(0))
    assert z.mean() == pytest.approx(-0.5, abs=0.01)
    assert z.var() == pytest.approx(1.0, rel=0.01)
    assert np.exp(z).mean() == pytest.approx(1.0, abs=0.015)


def test_with_synthetic_noise_keeps_everything_else(lgss):
    model, post = lgss
    draws = exact_draws(model, posterior_t(post), 100, 1)
    noisy = with_synthetic_noise(draws, 0.5, stream(2))
    np.testing.assert_array_equal(noisy.theta, draws.theta)
    assert np.all(noisy.loglik_var_hat == 0.5)
    assert not np.array_equal(noisy.log_lik_hat, draws.log_lik_hat)


def test_fitted_t_has_heavier_tails_than_posterior(lgss):
    model, post = lgss
    rough = ParameterProposal.student_t([0.0, -2.0], np.eye(2), 5)
    fitted = fit_from_weighted_draws(exact_draws(model, rough, 5000, 1))
    draws = exact_draws(model, fitted, 10_000, 2)
    w = shifted_weights(draws.log_weights)
    assert (w / w.sum()).max() < 0.05


def test_adapt_proposal_moves_toward_posterior(lgss):
    model, post = lgss
    g = adapt_proposal(model, ParameterProposal.student_t([0.0, -2.0], np.eye(2), 5), 1000, 4, fixed_n=10)
    np.testing.assert_allclose(g.location, post["mean"], atol=0.1)


def test_consistency_error_shrinks_like_root_m(lgss):
    model, post = lgss
    g = posterior_t(post)
    errors = {}
    for m in (1_000, 10_000, 100_000):
        errs = [np.abs(posterior_means(exact_draws(model, g, m, 100 * r + m)) - post["mean"]) for r in range(8)]
        errors[m] = np.sqrt(np.mean(np.square(errs), axis=0))
    for k in range(2):
        assert errors[1_000][k] > errors[10_000][k] > errors[100_000][k]
        slope = np.polyfit(np.log([1e3, 1e4, 1e5]), np.log([errors[m][k] for m in errors]), 1)[0]
        assert -0.75 < slope < -0.3


def test_tnv_curve_fields(lgss):
    model, post = lgss
    points = tnv_curve(model, posterior_t(post), 200, 1, [4, 16], coordinate(0))
    assert [p.n for p in points] == [4, 16]
    for p in points:
        assert p.elapsed > 0 and p.variance > 0
        assert p.tnv == pytest.approx(p.variance * p.elapsed)


def test_run_needs_positive_m(lgss):
    model, post = lgss
    with pytest.raises(ConfigError):
        run_is2(model, posterior_t(post), 0, 1, fixed_n=3)
