"""Naive and importance-sampled estimators plus empirical diagnostics."""

import math

import numpy as np
import pytest

from ppdeval.conjugate import NaturalParams, NormalKnownVar, posterior_params
from ppdeval.estimators import (
    EstimatorReport,
    LogEstimateBatch,
    collect_is,
    collect_naive,
    empirical_report,
    evaluate_lis,
    is_log_rk,
    naive_log_rk,
)
from ppdeval.targets import conjugate_loglik_target, lis_target
from ppdeval.vi import FullRankGaussian, TrainConfig, train
from tests.test_vi import make_normal_lis


def small_delta_instance():
    """A Normal setup whose naive estimator has healthy SNR (delta ~ 0.1)."""
    model = NormalKnownVar(sigma2=1.0)
    xi0 = NaturalParams(0.0, 1.0)
    train_s = model.summarize(np.full(50, 1.0))
    test_s = model.summarize([1.2, 0.8])
    xi_post = posterior_params(xi0, train_s)
    log_ppd = model.log_ppd_exact(xi0, train_s, test_s)
    return model, xi_post, test_s, log_ppd


class TestNaiveLogRk:
    def test_constant_likelihood(self):
        sampler = lambda k, rng: rng.standard_normal(k)
        for K in (1, 7, 1000):
            val = naive_log_rk(sampler, lambda z: np.full(len(z), -3.25), K,
                               np.random.default_rng(0))
            assert val == pytest.approx(-3.25, abs=1e-12)

    def test_single_sample_is_single_loglik(self):
        model, xi_post, test_s, _ = small_delta_instance()
        rng = np.random.default_rng(1)
        z = model.sample_posterior(xi_post, 1, np.random.default_rng(1))
        val = naive_log_rk(
            lambda k, g: model.sample_posterior(xi_post, k, g),
            lambda z: model.loglik(z, test_s),
            1,
            np.random.default_rng(1),
        )
        np.testing.assert_allclose(val, model.loglik(z[0], test_s), rtol=1e-12)

    def test_unbiased_on_small_delta_instance(self):
        model, xi_post, test_s, log_ppd = small_delta_instance()
        rng = np.random.default_rng(2)
        z = model.sample_posterior(xi_post, 10**5, rng)
        vals = np.exp(model.loglik(z, test_s) - log_ppd)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 1.0) <= 3 * se

    def test_all_zero_likelihood_warns(self):
        with pytest.warns(UserWarning, match="-inf"):
            val = naive_log_rk(
                lambda k, rng: rng.standard_normal(k),
                lambda z: np.full(len(z), -np.inf),
                10,
                np.random.default_rng(3),
            )
        assert val == -math.inf

    def test_chunking_does_not_change_the_estimate(self):
        import ppdeval.estimators as est_mod

        model, xi_post, test_s, _ = small_delta_instance()
        args = (
            lambda k, g: model.sample_posterior(xi_post, k, g),
            lambda z: model.loglik(z, test_s),
            4096,
        )
        whole = naive_log_rk(*args, np.random.default_rng(4))
        old = est_mod._CHUNK_ELEMS
        est_mod._CHUNK_ELEMS = 1000
        try:
            chunked = naive_log_rk(*args, np.random.default_rng(4))
        finally:
            est_mod._CHUNK_ELEMS = old
        np.testing.assert_allclose(whole, chunked, rtol=1e-12)


class TestIsLogRk:
    def test_bit_identical_to_naive_when_proposal_is_q(self):
        """Proposal equal to the sampling density with a shared random path
        must reproduce the naive estimate exactly."""
        lis, optimal, _ = make_normal_lis([10.1, 9.9], [6.0, 6.5])
        q = FullRankGaussian.from_mean_chol(optimal.mu + 0.7, 1.3 * optimal.scale_tril())
        model = NormalKnownVar(sigma2=1.0)
        test_s = model.summarize([6.0, 6.5])
        lik = conjugate_loglik_target(model, test_s)
        lis_q = lis_target(q.as_target(), lik)
        for K in (1, 13, 500):
            a = is_log_rk(q, lis_q, K, np.random.default_rng(42))
            b = naive_log_rk(
                lambda k, g: q.sample(k, g),
                lik.logdensity,
                K,
                np.random.default_rng(42),
                dim=1,
            )
            assert a == b

    def test_optimal_proposal_has_zero_variance(self):
        lis, optimal, log_ppd = make_normal_lis([10.1, 9.9, 10.2], [5.0, 5.4])
        vals = [
            is_log_rk(optimal, lis, 3, np.random.default_rng(s)) for s in range(20)
        ]
        np.testing.assert_allclose(vals, log_ppd, rtol=1e-9)

    def test_unbiased_under_offset_proposal(self):
        model, xi_post, test_s, log_ppd = small_delta_instance()
        spec = model.to_standard(xi_post)
        q = FullRankGaussian.from_mean_chol(spec.mean, math.sqrt(spec.var) * np.eye(1))
        r = FullRankGaussian.from_mean_chol(
            spec.mean + 0.2, 1.4 * math.sqrt(spec.var) * np.eye(1)
        )
        lis = lis_target(q.as_target(), conjugate_loglik_target(model, test_s))
        rng = np.random.default_rng(5)
        vals = np.exp([is_log_rk(r, lis, 1, rng) - log_ppd for _ in range(4000)])
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 1.0) <= 3 * se

    def test_dimension_mismatch_rejected(self):
        lis, optimal, _ = make_normal_lis([10.0], [5.0])
        with pytest.raises(ValueError):
            is_log_rk(FullRankGaussian.standard(2), lis, 3, np.random.default_rng(0))


class TestEvaluateLis:
    def test_normal_scenario_recovers_log_ppd(self):
        model = NormalKnownVar(sigma2=1.0)
        xi0 = NaturalParams(0.0, 1.0)
        train_s = model.summarize(np.full(100, 10.08))
        test_s = model.summarize(np.full(100, 4.96))
        from ppdeval.targets import conjugate_posterior_target

        q_t = conjugate_posterior_target(model, posterior_params(xi0, train_s))
        lik = conjugate_loglik_target(model, test_s)
        log_ppd = model.log_ppd_exact(xi0, train_s, test_s)
        cfg = TrainConfig(iters=300, learning_rate=1e-3, M=16, grad_batch=8, seed=0)
        _, val = evaluate_lis(q_t, lik, cfg, 1, np.random.default_rng(6))
        assert abs(val - log_ppd) < 0.1

    def test_zero_iterations_from_q_is_naive(self):
        """Training for zero steps starting at q reduces IS to naive MC."""
        model, xi_post, test_s, _ = small_delta_instance()
        spec = model.to_standard(xi_post)
        q = FullRankGaussian.from_mean_chol(spec.mean, math.sqrt(spec.var) * np.eye(1))
        lik = conjugate_loglik_target(model, test_s)
        lis = lis_target(q.as_target(), lik)
        cfg = TrainConfig(iters=0, learning_rate=1e-3, M=4, grad_batch=2, seed=0)
        r = train(lis, q, "iwelbo", cfg).dist
        a = is_log_rk(r, lis, 64, np.random.default_rng(7))
        b = naive_log_rk(
            lambda k, g: q.sample(k, g), lik.logdensity, 64,
            np.random.default_rng(7), dim=1,
        )
        assert a == b


class TestEmpiricalReport:
    def test_identical_values_give_infinite_snr(self):
        batch = LogEstimateBatch(np.full(5, -2.0), 1, 5)
        rep = empirical_report(batch)
        assert rep.log10_snr_hat == math.inf
        assert rep.mean_log_r == -2.0

    def test_two_point_batch(self):
        batch = LogEstimateBatch(np.log([1.0, 3.0]), 1, 2)
        rep = empirical_report(batch)
        np.testing.assert_allclose(rep.log10_snr_hat, math.log10(math.sqrt(2)), rtol=1e-12)
        np.testing.assert_allclose(rep.log10_snr_hat, 0.1505, atol=1e-4)

    def test_requires_two_replicates(self):
        with pytest.raises(ValueError):
            empirical_report(LogEstimateBatch(np.array([1.0]), 1, 1))

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        values = rng.normal(-5, 2, 100)
        base = empirical_report(LogEstimateBatch(values, 1, 100))
        shifted = empirical_report(LogEstimateBatch(values + 512.0, 1, 100))
        np.testing.assert_allclose(shifted.log10_snr_hat, base.log10_snr_hat, rtol=1e-10)
        np.testing.assert_allclose(shifted.mean_log_r, base.mean_log_r + 512.0, rtol=1e-12)

    def test_huge_magnitudes_do_not_overflow(self):
        values = np.array([-1e4, -1e4 + 1.0, -1e4 - 1.0])
        with np.errstate(over="raise"):
            rep = empirical_report(LogEstimateBatch(values, 1, 3))
        assert np.isfinite(rep.log10_snr_hat)

    def test_calibrated_against_closed_form(self):
        """Empirical SNR matches the closed form on a known-delta instance."""
        from ppdeval.snr import delta_approx, snr_from_delta
        from ppdeval.conjugate import SufficientSummary

        model = NormalKnownVar(sigma2=1.0)
        eta = NaturalParams(0.0, 1.0)
        c = 2.0
        test_s = SufficientSummary([c], 1)
        delta = delta_approx(model, eta, test_s).delta
        closed = snr_from_delta(delta, 1)
        rng = np.random.default_rng(9)
        z = model.sample_posterior(eta, 30000, rng)
        values = model.loglik(z, test_s)
        rep = empirical_report(LogEstimateBatch(values, 1, len(values)))
        assert abs(10**rep.log10_snr_hat - closed) / closed < 0.2

    def test_batch_validation(self):
        with pytest.raises(ValueError):
            LogEstimateBatch(np.array([1.0, np.nan]), 1, 2)
        with pytest.raises(ValueError):
            LogEstimateBatch(np.array([1.0, np.inf]), 1, 2)
        with pytest.raises(ValueError):
            LogEstimateBatch(np.array([1.0, 2.0]), 1, 3)


class TestCollectors:
    def test_monotone_in_k_in_expectation(self):
        """Jensen: bigger inner K gives a larger mean log estimate."""
        model = NormalKnownVar(sigma2=1.0)
        xi0 = NaturalParams(0.0, 1.0)
        train_s = model.summarize(np.full(50, 1.0))
        test_s = model.summarize([4.0, 4.4])  # enough mismatch for power
        xi_post = posterior_params(xi0, train_s)
        sampler = lambda k, g: model.sample_posterior(xi_post, k, g)
        loglik = lambda z: model.loglik(z, test_s)
        rng = np.random.default_rng(10)
        small = collect_naive(sampler, loglik, 1, 1000, rng)
        big = collect_naive(sampler, loglik, 1000, 1000, rng)
        se = small.values.std(ddof=1) / math.sqrt(small.S)
        assert big.values.mean() > small.values.mean() + 3 * se

    def test_deterministic_given_seed(self):
        model, xi_post, test_s, _ = small_delta_instance()
        sampler = lambda k, g: model.sample_posterior(xi_post, k, g)
        loglik = lambda z: model.loglik(z, test_s)
        a = collect_naive(sampler, loglik, 8, 20, np.random.default_rng(11))
        b = collect_naive(sampler, loglik, 8, 20, np.random.default_rng(11))
        np.testing.assert_array_equal(a.values, b.values)

    def test_collect_is_matches_report_shape(self):
        lis, optimal, log_ppd = make_normal_lis([10.0, 9.9], [6.0])
        batch = collect_is(optimal, lis, 4, 50, np.random.default_rng(12))
        rep = empirical_report(batch)
        assert isinstance(rep, EstimatorReport)
        np.testing.assert_allclose(batch.values, log_ppd, rtol=1e-9)
