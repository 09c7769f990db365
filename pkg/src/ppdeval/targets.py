"""Unnormalized differentiable log-densities on unconstrained space.

Black-box variational inference needs nothing from a model beyond its joint
log density and gradient over R^d.  A :class:`DiffTarget` packages exactly
that (plus an optional Hessian for Laplace initialization).  Constrained
latent spaces are mapped to R through fixed transforms with the log-Jacobian
folded into the density.

Gradients are hand-derived per target rather than pulled from an autodiff
framework: the dimensionalities here are small, the chain rules are short,
and this keeps the core free of heavy dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .conjugate import (
    BinomialProb,
    ConjugateModel,
    ExponentialRate,
    NaturalParams,
    NormalKnownVar,
    SufficientSummary,
    posterior_params,
)

__all__ = [
    "DiffTarget",
    "IdentityTransform",
    "ExpTransform",
    "SigmoidTransform",
    "transform_for",
    "conjugate_joint_target",
    "conjugate_posterior_target",
    "conjugate_loglik_target",
    "logreg_joint_target",
    "logreg_loglik_target",
    "linreg_loglik_target",
    "gaussian_target",
    "lis_target",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class DiffTarget:
    """An unnormalized log density with gradient over R^dim.

    ``logdensity`` maps ``(dim,)`` to a float and ``(n, dim)`` to ``(n,)``;
    ``gradient`` maps ``(dim,)`` to ``(dim,)`` and ``(n, dim)`` to
    ``(n, dim)``.  ``hessian`` (single point only) may be None.  ``parts``
    carries the (sampler-density, likelihood) decomposition when the target
    was assembled by :func:`lis_target`; estimators exploit it to form
    importance weights by ratio first.
    """

    dim: int
    logdensity: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    parts: tuple["DiffTarget", "DiffTarget"] | None = None


def _sigmoid(u):
    u = np.asarray(u, dtype=float)
    e = np.exp(-np.abs(u))
    return np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(u):
    u = np.asarray(u, dtype=float)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


class IdentityTransform:
    """z = u on all of R."""

    def forward(self, u):
        return np.asarray(u, dtype=float)

    def inverse(self, z):
        return np.asarray(z, dtype=float)

    def log_jac(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def dlog_jac(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


class ExpTransform:
    """z = exp(u), mapping R onto the positive half line."""

    def forward(self, u):
        return np.exp(np.asarray(u, dtype=float))

    def inverse(self, z):
        return np.log(np.asarray(z, dtype=float))

    def log_jac(self, u):
        return np.asarray(u, dtype=float)

    def dlog_jac(self, u):
        return np.ones_like(np.asarray(u, dtype=float))


class SigmoidTransform:
    """z = sigmoid(u), mapping R onto the unit interval; overflow-safe."""

    def forward(self, u):
        return _sigmoid(np.asarray(u, dtype=float))

    def inverse(self, z):
        z = np.asarray(z, dtype=float)
        return np.log(z) - np.log1p(-z)

    def log_jac(self, u):
        u = np.asarray(u, dtype=float)
        return -_softplus(u) - _softplus(-u)

    def dlog_jac(self, u):
        return 1.0 - 2.0 * _sigmoid(np.asarray(u, dtype=float))


def transform_for(model: ConjugateModel):
    """The fixed unconstraining transform paired with each model."""
    if isinstance(model, NormalKnownVar):
        return IdentityTransform()
    if isinstance(model, ExponentialRate):
        return ExpTransform()
    if isinstance(model, BinomialProb):
        return SigmoidTransform()
    raise TypeError(f"no transform registered for {model!r}")


def _ravel_u(u):
    """Canonicalize u to (n, d) plus a flag for single-point input."""
    u = np.asarray(u, dtype=float)
    single = u.ndim <= 1
    return np.atleast_2d(u), single


def _expfam_target(
    model: ConjugateModel,
    coeff_tau: np.ndarray,
    coeff_nu: float,
    const: float,
    with_jacobian: bool,
) -> DiffTarget:
    """log f(u) = coeff_tau . phi(z(u)) - coeff_nu A(z(u)) + const [+ log|dz/du|].

    Covers conjugate densities (prior/posterior, with Jacobian) and
    likelihood terms (without) for all three models; gradients and Hessians
    come from short per-model chain rules.
    """
    if isinstance(model, NormalKnownVar):
        d, s2 = model.dim, model.sigma2
        ct = np.asarray(coeff_tau, dtype=float)

        def logdensity(u):
            ub, single = _ravel_u(u)
            val = ub @ ct / s2 - coeff_nu * np.sum(ub**2, axis=1) / (2.0 * s2) + const
            return float(val[0]) if single else val

        def gradient(u):
            ub, single = _ravel_u(u)
            g = (ct - coeff_nu * ub) / s2
            return g[0] if single else g

        def hessian(u):
            return -(coeff_nu / s2) * np.eye(d)

        return DiffTarget(d, logdensity, gradient, hessian)

    if isinstance(model, ExponentialRate):
        t = float(np.asarray(coeff_tau, dtype=float).reshape(-1)[0])
        jac = 1.0 if with_jacobian else 0.0

        def logdensity(u):
            ub, single = _ravel_u(u)
            uu = ub[:, 0]
            val = -t * np.exp(uu) + coeff_nu * uu + const + jac * uu
            return float(val[0]) if single else val

        def gradient(u):
            ub, single = _ravel_u(u)
            g = (-t * np.exp(ub[:, 0]) + coeff_nu + jac)[:, None]
            return g[0] if single else g

        def hessian(u):
            uu = np.asarray(u, dtype=float).reshape(-1)[0]
            return np.array([[-t * np.exp(uu)]])

        return DiffTarget(1, logdensity, gradient, hessian)

    if isinstance(model, BinomialProb):
        t = float(np.asarray(coeff_tau, dtype=float).reshape(-1)[0])
        n = model.n_trials
        jac = 1.0 if with_jacobian else 0.0

        def logdensity(u):
            ub, single = _ravel_u(u)
            uu = ub[:, 0]
            val = t * uu - coeff_nu * n * _softplus(uu) + const
            if jac:
                val = val - _softplus(uu) - _softplus(-uu)
            return float(val[0]) if single else val

        def gradient(u):
            ub, single = _ravel_u(u)
            sig = _sigmoid(ub[:, 0])
            g = (t - coeff_nu * n * sig + jac * (1.0 - 2.0 * sig))[:, None]
            return g[0] if single else g

        def hessian(u):
            uu = np.asarray(u, dtype=float).reshape(-1)[0]
            sig = float(_sigmoid(uu))
            return np.array([[-(coeff_nu * n + 2.0 * jac) * sig * (1.0 - sig)]])

        return DiffTarget(1, logdensity, gradient, hessian)

    raise TypeError(f"no target construction for {model!r}")


def conjugate_joint_target(
    model: ConjugateModel, xi0: NaturalParams, data: SufficientSummary
) -> DiffTarget:
    """``log p(z(u)) + log p(D | z(u)) + log|dz/du|`` on unconstrained space."""
    xi = posterior_params(xi0, data)
    const = -model.log_partition(xi0) + data.log_h_sum
    return _expfam_target(model, xi.tau, xi.nu, const, with_jacobian=True)


def conjugate_posterior_target(model: ConjugateModel, xi: NaturalParams) -> DiffTarget:
    """The normalized conjugate density ``s(z(u) | xi)`` pushed to R."""
    const = -model.log_partition(xi)
    return _expfam_target(model, xi.tau, xi.nu, const, with_jacobian=True)


def conjugate_loglik_target(model: ConjugateModel, data: SufficientSummary) -> DiffTarget:
    """``log p(D | z(u))`` alone: no Jacobian, it is not a density in u."""
    return _expfam_target(
        model, data.t_sum, data.count, data.log_h_sum, with_jacobian=False
    )


def logreg_joint_target(X, y, prior_mu, prior_Sigma) -> DiffTarget:
    """Gaussian prior plus Bernoulli likelihood through a logistic link."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        bad = y[(y != 0) & (y != 1)][0]
        raise ValueError(f"responses must be 0/1, found {bad!r}")
    mu0 = np.asarray(prior_mu, dtype=float).reshape(-1)
    Sigma0 = np.asarray(prior_Sigma, dtype=float)
    d = mu0.shape[0]
    if X.shape[1] != d:
        raise ValueError("feature and prior dimensions disagree")
    L0 = cholesky(Sigma0, lower=True)
    logdet0 = 2.0 * np.sum(np.log(np.diag(L0)))
    prior_prec = cho_solve((L0, True), np.eye(d))

    lik = logreg_loglik_target(X, y)

    def logdensity(u):
        ub, single = _ravel_u(u)
        diff = ub - mu0
        w = solve_triangular(L0, diff.T, lower=True)
        lp = -0.5 * np.sum(w**2, axis=0) - 0.5 * (d * _LOG_2PI + logdet0)
        val = lp + lik.logdensity(ub)
        return float(val[0]) if single else val

    def gradient(u):
        ub, single = _ravel_u(u)
        g = (mu0 - ub) @ prior_prec + lik.gradient(ub)
        return g[0] if single else g

    def hessian(u):
        return -prior_prec + lik.hessian(u)

    return DiffTarget(d, logdensity, gradient, hessian)


def logreg_loglik_target(X, y) -> DiffTarget:
    """Bernoulli log likelihood ``sum_i [y_i t_i - softplus(t_i)]``, t = X z."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        bad = y[(y != 0) & (y != 1)][0]
        raise ValueError(f"responses must be 0/1, found {bad!r}")
    d = X.shape[1]

    def logdensity(u):
        ub, single = _ravel_u(u)
        logits = ub @ X.T
        val = logits @ y - np.sum(_softplus(logits), axis=1)
        return float(val[0]) if single else val

    def gradient(u):
        ub, single = _ravel_u(u)
        logits = ub @ X.T
        g = (y - _sigmoid(logits)) @ X
        return g[0] if single else g

    def hessian(u):
        uu = np.asarray(u, dtype=float).reshape(-1)
        p = _sigmoid(X @ uu)
        return -(X.T * (p * (1.0 - p))) @ X

    return DiffTarget(d, logdensity, gradient, hessian)


def linreg_loglik_target(Xstar, ystar, sigma2: float) -> DiffTarget:
    """Gaussian log likelihood of fixed test rows as a function of weights."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    ystar = np.asarray(ystar, dtype=float).reshape(-1)
    nstar, d = Xstar.shape
    A = Xstar.T @ Xstar / sigma2
    b = Xstar.T @ ystar / sigma2
    const = -0.5 * float(ystar @ ystar) / sigma2 - 0.5 * nstar * (
        _LOG_2PI + np.log(sigma2)
    )

    def logdensity(u):
        ub, single = _ravel_u(u)
        val = ub @ b - 0.5 * np.sum((ub @ A) * ub, axis=1) + const
        return float(val[0]) if single else val

    def gradient(u):
        ub, single = _ravel_u(u)
        g = b - ub @ A
        return g[0] if single else g

    def hessian(u):
        return -A

    return DiffTarget(d, logdensity, gradient, hessian)


def gaussian_target(mean, chol) -> DiffTarget:
    """A normalized Gaussian density as a DiffTarget (for proposals/q's)."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    L = np.tril(np.asarray(chol, dtype=float))
    d = mean.shape[0]
    log_norm = -np.sum(np.log(np.diag(L))) - 0.5 * d * _LOG_2PI
    prec = cho_solve((L, True), np.eye(d))

    def logdensity(u):
        ub, single = _ravel_u(u)
        w = solve_triangular(L, (ub - mean).T, lower=True)
        val = -0.5 * np.sum(w**2, axis=0) + log_norm
        return float(val[0]) if single else val

    def gradient(u):
        ub, single = _ravel_u(u)
        g = (mean - ub) @ prec
        return g[0] if single else g

    def hessian(u):
        return -prec

    return DiffTarget(d, logdensity, gradient, hessian)


def lis_target(q_target: DiffTarget, loglik_target: DiffTarget) -> DiffTarget:
    """The unnormalized optimal-proposal density ``p(D* | z) q(z)``.

    Its normalizing constant is exactly the predictive density being
    estimated, so a proposal matching it gives a zero-variance estimator.
    """
    if q_target.dim != loglik_target.dim:
        raise ValueError("q and likelihood targets live on different spaces")

    def logdensity(u):
        return q_target.logdensity(u) + loglik_target.logdensity(u)

    def gradient(u):
        return q_target.gradient(u) + loglik_target.gradient(u)

    hessian = None
    if q_target.hessian is not None and loglik_target.hessian is not None:

        def hessian(u):
            return q_target.hessian(u) + loglik_target.hessian(u)

    return DiffTarget(
        q_target.dim, logdensity, gradient, hessian, parts=(q_target, loglik_target)
    )
