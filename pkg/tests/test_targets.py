"""Differentiable targets: transforms, gradients and composition."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from ppdeval.conjugate import (
    BinomialProb,
    ExponentialRate,
    NaturalParams,
    NormalKnownVar,
    SufficientSummary,
    posterior_params,
)
from ppdeval.targets import (
    DiffTarget,
    ExpTransform,
    IdentityTransform,
    SigmoidTransform,
    conjugate_joint_target,
    conjugate_loglik_target,
    conjugate_posterior_target,
    gaussian_target,
    linreg_loglik_target,
    lis_target,
    logreg_joint_target,
    logreg_loglik_target,
    transform_for,
)

TRANSFORMS = [IdentityTransform(), ExpTransform(), SigmoidTransform()]


def check_gradient(target, points, rtol=1e-4):
    """The spec-level gradient invariant: central differences at given points."""
    for u in points:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        g = target.gradient(u)
        fd = np.zeros_like(u)
        for i in range(u.shape[0]):
            h = 1e-5 * (1.0 + abs(u[i]))
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (target.logdensity(up) - target.logdensity(dn)) / (2 * h)
        scale = np.maximum(np.abs(fd), 1e-6)
        np.testing.assert_allclose(g, fd, rtol=rtol, atol=rtol * np.max(scale))


class TestTransforms:
    @pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: type(t).__name__)
    def test_round_trip(self, tr):
        u = np.linspace(-8, 8, 33)
        np.testing.assert_allclose(tr.inverse(tr.forward(u)), u, atol=1e-12)

    @pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: type(t).__name__)
    def test_log_jacobian_matches_derivative(self, tr):
        u = np.linspace(-4, 4, 17)
        h = 1e-6
        dz = (tr.forward(u + h) - tr.forward(u - h)) / (2 * h)
        np.testing.assert_allclose(tr.log_jac(u), np.log(np.abs(dz)), atol=1e-8)

    @pytest.mark.parametrize(
        "tr,support",
        [(ExpTransform(), (0.0, np.inf)), (SigmoidTransform(), (0.0, 1.0))],
        ids=["exp", "sigmoid"],
    )
    def test_pushforward_of_standard_normal_normalizes(self, tr, support):
        def dens(z):
            u = tr.inverse(np.asarray(z))
            return float(np.exp(norm.logpdf(u) - tr.log_jac(u)))

        total, _ = integrate.quad(dens, *support, limit=300)
        np.testing.assert_allclose(total, 1.0, atol=1e-5)

    def test_sigmoid_stable_at_extremes(self):
        tr = SigmoidTransform()
        with np.errstate(over="raise"):
            vals = tr.forward(np.array([-700.0, 700.0]))
            lj = tr.log_jac(np.array([-700.0, 700.0]))
        assert 0.0 <= vals[0] < 1e-300 or vals[0] == 0.0
        assert vals[1] == 1.0
        assert np.all(np.isfinite(lj))

    def test_model_pairing(self):
        assert isinstance(transform_for(NormalKnownVar(1.0)), IdentityTransform)
        assert isinstance(transform_for(ExponentialRate()), ExpTransform)
        assert isinstance(transform_for(BinomialProb(10)), SigmoidTransform)


class TestConjugateTargets:
    def test_normal_mode_is_posterior_mean(self):
        model = NormalKnownVar(sigma2=2.0)
        xi0 = NaturalParams(0.0, 1.0)
        data = model.summarize([3.0, 5.0, 4.0])
        target = conjugate_joint_target(model, xi0, data)
        xi_post = posterior_params(xi0, data)
        mode = model.to_standard(xi_post).mean
        np.testing.assert_allclose(target.gradient(mode), 0.0, atol=1e-12)

    def test_exponential_flat_prior_value_at_origin(self):
        model = ExponentialRate()
        target = conjugate_joint_target(
            model, NaturalParams(1.0, 0.0), SufficientSummary.empty()
        )
        np.testing.assert_allclose(target.logdensity(np.array([0.0])), -1.0, rtol=1e-12)

    @pytest.mark.parametrize("name", ["normal", "exp", "binomial"])
    def test_gradient_invariant(self, name):
        model = {
            "normal": NormalKnownVar(1.0),
            "exp": ExponentialRate(),
            "binomial": BinomialProb(100),
        }[name]
        xi0 = {
            "normal": NaturalParams(0.0, 1.0),
            "exp": NaturalParams(1.0, 0.0),
            "binomial": NaturalParams(0.0, 0.0),
        }[name]
        pts = {
            "normal": [4.0, 7.0, 12.0],
            "exp": [0.4, 0.9, 2.0],
            "binomial": [10.0, 37.0, 60.0],
        }[name]
        data = model.summarize(pts)
        rng = np.random.default_rng(1)
        points = rng.normal(0, 2, size=(20, 1))
        check_gradient(conjugate_joint_target(model, xi0, data), points)
        check_gradient(conjugate_loglik_target(model, data), points)
        check_gradient(
            conjugate_posterior_target(model, posterior_params(xi0, data)), points
        )

    def test_hessian_matches_gradient_differences(self):
        model = BinomialProb(100)
        data = model.summarize([20.0, 35.0])
        target = conjugate_joint_target(model, NaturalParams(0.0, 0.0), data)
        u = np.array([0.3])
        h = 1e-6
        fd = (target.gradient(np.array([0.3 + h])) - target.gradient(np.array([0.3 - h]))) / (
            2 * h
        )
        np.testing.assert_allclose(target.hessian(u)[0, 0], fd[0], rtol=1e-6)

    def test_posterior_target_is_normalized(self):
        model = ExponentialRate()
        xi = NaturalParams(9.0, 12.0)
        target = conjugate_posterior_target(model, xi)
        total, _ = integrate.quad(
            lambda u: math.exp(target.logdensity(np.array([u]))), -6, 3, limit=300
        )
        np.testing.assert_allclose(total, 1.0, atol=1e-6)


class TestLogregTargets:
    def setup_method(self):
        rng = np.random.default_rng(2)
        self.X = rng.standard_normal((40, 3))
        self.y = (rng.random(40) < 0.5).astype(float)

    def test_data_terms_at_origin(self):
        target = logreg_joint_target(self.X, self.y, np.zeros(3), np.eye(3))
        prior_at_zero = -1.5 * math.log(2 * math.pi)
        np.testing.assert_allclose(
            target.logdensity(np.zeros(3)), prior_at_zero - 40 * math.log(2), rtol=1e-12
        )

    def test_gradient_invariant(self):
        rng = np.random.default_rng(3)
        target = logreg_joint_target(self.X, self.y, np.zeros(3), 2.0 * np.eye(3))
        check_gradient(target, rng.normal(0, 1.5, size=(20, 3)))

    def test_hessian_matches_gradient_differences(self):
        target = logreg_joint_target(self.X, self.y, np.zeros(3), np.eye(3))
        rng = np.random.default_rng(4)
        u = rng.standard_normal(3)
        H = target.hessian(u)
        fd = np.zeros((3, 3))
        for i in range(3):
            h = 1e-6
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd[:, i] = (target.gradient(up) - target.gradient(dn)) / (2 * h)
        np.testing.assert_allclose(H, fd, rtol=1e-4, atol=1e-6)

    def test_bad_labels_rejected(self):
        y = self.y.copy()
        y[3] = 2.0
        with pytest.raises(ValueError):
            logreg_joint_target(self.X, y, np.zeros(3), np.eye(3))

    def test_loglik_target_has_no_prior(self):
        lik = logreg_loglik_target(self.X, self.y)
        np.testing.assert_allclose(
            lik.logdensity(np.zeros(3)), -40 * math.log(2), rtol=1e-12
        )

    def test_stable_for_large_logits(self):
        lik = logreg_loglik_target(self.X, self.y)
        with np.errstate(over="raise"):
            val = lik.logdensity(np.full(3, 300.0))
        assert np.isfinite(val)


class TestLinregLoglikTarget:
    def test_matches_direct_gaussian(self):
        rng = np.random.default_rng(5)
        Xs = rng.standard_normal((6, 2))
        ys = rng.standard_normal(6)
        target = linreg_loglik_target(Xs, ys, 1.5)
        z = rng.standard_normal(2)
        direct = float(
            np.sum(norm.logpdf(ys, loc=Xs @ z, scale=math.sqrt(1.5)))
        )
        np.testing.assert_allclose(target.logdensity(z), direct, rtol=1e-12)
        check_gradient(target, rng.normal(size=(10, 2)))


class TestLisTarget:
    def test_zero_likelihood_reduces_to_q(self):
        q = gaussian_target(np.zeros(2), np.eye(2))
        zero = DiffTarget(
            2, lambda u: np.zeros(np.atleast_2d(u).shape[0]) if np.asarray(u).ndim > 1 else 0.0,
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        )
        lis = lis_target(q, zero)
        rng = np.random.default_rng(6)
        for u in rng.normal(size=(5, 2)):
            np.testing.assert_allclose(lis.logdensity(u), q.logdensity(u), rtol=1e-12)

    def test_normal_case_equals_updated_posterior_plus_constant(self):
        """With a conjugate Normal q, the product is the refreshed posterior
        scaled by exactly the predictive density."""
        model = NormalKnownVar(sigma2=1.0)
        xi0 = NaturalParams(0.0, 1.0)
        train = model.summarize([9.5, 10.5, 10.0])
        test = model.summarize([5.0, 6.0])
        xi_d = posterior_params(xi0, train)
        q = conjugate_posterior_target(model, xi_d)
        lik = conjugate_loglik_target(model, test)
        lis = lis_target(q, lik)
        refreshed = conjugate_posterior_target(model, posterior_params(xi_d, test))
        log_ppd = model.log_ppd_exact(xi0, train, test)
        rng = np.random.default_rng(7)
        us = rng.normal(8, 2, size=(10, 1))
        gaps = lis.logdensity(us) - refreshed.logdensity(us)
        np.testing.assert_allclose(gaps, log_ppd, rtol=1e-9)

    def test_gradient_additivity(self):
        rng = np.random.default_rng(8)
        q = gaussian_target(rng.normal(size=2), np.tril(rng.normal(size=(2, 2))) + 3 * np.eye(2))
        lik = linreg_loglik_target(rng.standard_normal((4, 2)), rng.standard_normal(4), 1.0)
        check_gradient(lis_target(q, lik), rng.normal(size=(20, 2)))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            lis_target(
                gaussian_target(np.zeros(2), np.eye(2)),
                gaussian_target(np.zeros(3), np.eye(3)),
            )
