"""Bayesian linear regression closed forms.

Gaussian likelihood with known noise variance and a Gaussian prior over the
weights: the posterior, the log evidence, exact log predictive densities and
the estimator's delta are all available in closed form.  Everything is done
through Cholesky factorizations; deltas here can reach 1e4 nats and naive
determinant products would overflow long before that.

Also provides the mismatched-copy test-set construction (stack m copies of
the training set with a shift added to the responses) together with the
large-data limit of delta for that construction and its dimension-only
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .snr import delta_gaussians

__all__ = [
    "LinRegProblem",
    "GaussianDist",
    "Thm3Limit",
    "posterior",
    "log_evidence",
    "log_ppd_exact_linreg",
    "delta_exact_linreg",
    "delta_limit_thm3",
    "make_mismatch_copies",
    "with_extra_rows",
    "whitened_loglik_quadratic",
    "whitened_is_quadratic",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LinRegProblem:
    """Design matrix, responses, noise variance and Gaussian prior."""

    X: np.ndarray
    y: np.ndarray
    sigma2: float
    mu0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        mu0 = np.asarray(self.mu0, dtype=float).reshape(-1)
        Sigma0 = np.asarray(self.Sigma0, dtype=float)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[1] != mu0.shape[0] or Sigma0.shape != (mu0.shape[0], mu0.shape[0]):
            raise ValueError("prior dimensions do not match the feature count")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma0", Sigma0)
        # validates positive definiteness once, reused everywhere below
        object.__setattr__(self, "_chol0", cholesky(Sigma0, lower=True))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def prior_chol(self) -> np.ndarray:
        return self._chol0


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate Gaussian stored as mean plus lower Cholesky factor."""

    mean: np.ndarray
    chol: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        chol = np.asarray(self.chol, dtype=float)
        if chol.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("chol must be square and match the mean")
        if np.any(np.diag(chol) <= 0):
            raise ValueError("chol must have a strictly positive diagonal")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "chol", np.tril(chol))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.chol @ self.chol.T

    def logdensity(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        diff = np.atleast_2d(z) - self.mean
        w = solve_triangular(self.chol, diff.T, lower=True)
        vals = (
            -0.5 * np.sum(w**2, axis=0)
            - np.sum(np.log(np.diag(self.chol)))
            - 0.5 * self.dim * _LOG_2PI
        )
        return float(vals[0]) if z.ndim == 1 else vals

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        eps = rng.standard_normal((count, self.dim))
        return self.mean + eps @ self.chol.T


def _posterior_precision_chol(problem: LinRegProblem) -> np.ndarray:
    """Cholesky factor of X'X / sigma2 + Sigma0^-1."""
    L0 = problem.prior_chol()
    prior_prec = cho_solve((L0, True), np.eye(problem.dim))
    prec = problem.X.T @ problem.X / problem.sigma2 + prior_prec
    prec = 0.5 * (prec + prec.T)
    return cholesky(prec, lower=True)


def posterior(problem: LinRegProblem) -> GaussianDist:
    """Gaussian posterior over the weights (prior itself for zero rows)."""
    L0 = problem.prior_chol()
    if problem.n == 0:
        return GaussianDist(problem.mu0.copy(), L0)
    Lp = _posterior_precision_chol(problem)
    rhs = problem.X.T @ problem.y / problem.sigma2 + cho_solve((L0, True), problem.mu0)
    mean = cho_solve((Lp, True), rhs)
    cov = cho_solve((Lp, True), np.eye(problem.dim))
    cov = 0.5 * (cov + cov.T)
    return GaussianDist(mean, cholesky(cov, lower=True))


def log_evidence(problem: LinRegProblem) -> float:
    """Log marginal density of the responses under the prior.

    Uses the matrix-determinant lemma and Woodbury identity so only d-by-d
    matrices are ever factored, regardless of the number of rows.
    """
    n, d = problem.n, problem.dim
    if n == 0:
        return 0.0
    s2 = problem.sigma2
    L0 = problem.prior_chol()
    Lp = _posterior_precision_chol(problem)
    r = problem.y - problem.X @ problem.mu0
    # log det (X Sigma0 X' + s2 I) = n log s2 + log det Sigma0 + log det P
    logdet = (
        n * np.log(s2)
        + 2.0 * np.sum(np.log(np.diag(L0)))
        + 2.0 * np.sum(np.log(np.diag(Lp)))
    )
    xr = problem.X.T @ r
    w = solve_triangular(Lp, xr, lower=True)
    quad = (r @ r) / s2 - (w @ w) / s2**2
    return float(-0.5 * (n * _LOG_2PI + logdet + quad))


def with_extra_rows(problem: LinRegProblem, X2, y2) -> LinRegProblem:
    """The same prior and noise model conditioned on additional rows."""
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    y2 = np.asarray(y2, dtype=float).reshape(-1)
    if X2.shape[1] != problem.dim:
        raise ValueError(
            f"extra rows have {X2.shape[1]} columns, problem has {problem.dim}"
        )
    return LinRegProblem(
        np.vstack([problem.X, X2]),
        np.concatenate([problem.y, y2]),
        problem.sigma2,
        problem.mu0,
        problem.Sigma0,
    )


def log_ppd_exact_linreg(problem: LinRegProblem, Xstar, ystar) -> float:
    """Exact log predictive density of the test rows: V(D + D*) - V(D)."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    ystar = np.asarray(ystar, dtype=float).reshape(-1)
    if ystar.shape[0] == 0:
        return 0.0
    return log_evidence(with_extra_rows(problem, Xstar, ystar)) - log_evidence(problem)


def delta_exact_linreg(problem: LinRegProblem, Xstar, ystar) -> float:
    """Exact delta of the naive estimator sampling from the true posterior."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    ystar = np.asarray(ystar, dtype=float).reshape(-1)
    if ystar.shape[0] == 0:
        return 0.0
    post_d = posterior(problem)
    post_1 = posterior(with_extra_rows(problem, Xstar, ystar))
    post_2 = posterior(
        with_extra_rows(problem, np.vstack([Xstar, Xstar]), np.concatenate([ystar, ystar]))
    )
    return delta_gaussians(
        post_d.mean, post_d.cov, post_2.mean, post_2.cov, post_1.mean, post_1.cov
    )


class Thm3Limit(NamedTuple):
    limit: float
    lower: float
    upper: float


def delta_limit_thm3(X, Delta, sigma2: float, m: int) -> Thm3Limit:
    """Vanishing-prior limit of delta for m mismatched training-set copies.

    Returns the limit together with its dimension/mismatch bounds and checks
    that the limit falls between them (up to 1e-9 float slack).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Delta = np.asarray(Delta, dtype=float).reshape(-1)
    if Delta.shape[0] != X.shape[0]:
        raise ValueError("Delta must have one entry per training row")
    if m < 1:
        raise ValueError("m must be a positive integer")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    d = X.shape[1]
    Q, R = np.linalg.qr(X, mode="reduced")
    rdiag = np.abs(np.diag(R))
    if np.min(rdiag) <= X.shape[0] * np.finfo(float).eps * np.max(rdiag):
        raise np.linalg.LinAlgError("X is rank deficient; the limit is undefined")
    proj = Q.T @ Delta
    mismatch = float(proj @ proj)
    limit = 0.5 * d * np.log((1.0 + m) / np.sqrt(1.0 + 2.0 * m)) + (
        m**2 / (2.0 * m**2 + 3.0 * m + 1.0)
    ) * mismatch / (2.0 * sigma2)
    lower = 0.25 * d * np.log(m / 2.0)
    upper = 0.25 * d * np.log(m / 2.0 + 1.0) + float(Delta @ Delta) / (4.0 * sigma2)
    if not (lower - 1e-9 <= limit <= upper + 1e-9):
        raise FloatingPointError(
            f"limit {limit!r} escapes its bounds [{lower!r}, {upper!r}]"
        )
    return Thm3Limit(float(limit), float(lower), float(upper))


def make_mismatch_copies(X, y, Delta, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack m copies of the training set with Delta added to the responses."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    Delta = np.asarray(Delta, dtype=float).reshape(-1)
    if Delta.shape[0] != y.shape[0]:
        raise ValueError(
            f"Delta has {Delta.shape[0]} entries but y has {y.shape[0]}"
        )
    if m < 1:
        raise ValueError("m must be a positive integer")
    return np.tile(X, (m, 1)), np.tile(y + Delta, m)


def _loglik_quadratic_coeffs(Xstar, ystar, sigma2: float):
    """``log p(D*|z) = c + b.z - 0.5 z.A.z`` coefficients."""
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    ystar = np.asarray(ystar, dtype=float).reshape(-1)
    nstar = Xstar.shape[0]
    A = Xstar.T @ Xstar / sigma2
    b = Xstar.T @ ystar / sigma2
    c = -0.5 * float(ystar @ ystar) / sigma2 - 0.5 * nstar * (
        _LOG_2PI + np.log(sigma2)
    )
    return c, b, A


def _gaussian_quadratic_coeffs(mean, chol):
    """``log N(z | mean, chol chol') = c + b.z - 0.5 z.A.z`` coefficients."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    L = np.asarray(chol, dtype=float)
    d = mean.shape[0]
    prec = cho_solve((L, True), np.eye(d))
    prec = 0.5 * (prec + prec.T)
    b = prec @ mean
    c = -0.5 * float(mean @ b) - 0.5 * d * _LOG_2PI - float(
        np.sum(np.log(np.diag(L)))
    )
    return c, b, prec


def _whiten_quadratic(c, b, A, mean, L, clamp: bool = False):
    """Re-express a quadratic of z under z = mean + L eta, eigen-rotated.

    Returns ``(const, lin, lam)`` with ``f(eta) = const + lin @ eta
    - 0.5 * sum(lam * eta**2)`` for ``eta`` standard normal, which costs
    O(d) per draw to evaluate.
    """
    const = c + float(b @ mean) - 0.5 * float(mean @ A @ mean)
    lin = L.T @ (b - A @ mean)
    M = L.T @ A @ L
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    if clamp:
        lam = np.maximum(lam, 0.0)
    return float(const), V.T @ lin, lam


def whitened_loglik_quadratic(
    post: GaussianDist, Xstar, ystar, sigma2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Represent ``log p(D* | z)`` under ``z = mean + chol @ eta`` cheaply.

    The Gaussian log likelihood is a quadratic in the weights, so after
    whitening and rotating to the quadratic's eigenbasis it splits into d
    independent one-dimensional terms of a standard normal vector ``eta``:

        loglik(eta) = const + lin @ eta - 0.5 * sum(lam * eta**2)

    Returns ``(const, lin, lam)``.  Sampling the posterior and scoring the
    test rows then costs O(d) per draw instead of O(n* d), which is what
    makes million-sample naive-estimator sweeps affordable.
    """
    c, b, A = _loglik_quadratic_coeffs(Xstar, ystar, sigma2)
    return _whiten_quadratic(c, b, A, post.mean, post.chol, clamp=True)


def whitened_is_quadratic(
    r_mean, r_chol, post: GaussianDist, Xstar, ystar, sigma2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Whitened log importance weights for a Gaussian proposal.

    The log weight ``log p(D*|z) + log q(z) - log r(z)`` is a quadratic in
    the weights (possibly indefinite), re-expressed under proposal draws
    ``z = r_mean + r_chol @ eta`` in the same O(d)-per-draw form as
    :func:`whitened_loglik_quadratic`.
    """
    c1, b1, A1 = _loglik_quadratic_coeffs(Xstar, ystar, sigma2)
    c2, b2, A2 = _gaussian_quadratic_coeffs(post.mean, post.chol)
    c3, b3, A3 = _gaussian_quadratic_coeffs(r_mean, r_chol)
    return _whiten_quadratic(
        c1 + c2 - c3,
        b1 + b2 - b3,
        A1 + A2 - A3,
        np.asarray(r_mean, dtype=float).reshape(-1),
        np.asarray(r_chol, dtype=float),
    )
