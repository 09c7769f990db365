"""Conjugate exponential-family machinery.

Three likelihood models are supported, each paired with its conjugate prior
family: a (possibly multivariate) Normal with known variance, an Exponential
with unknown rate, and a Binomial with known trial count.  A dataset enters
every formula only through its sufficient summary ``(sum of T(y), |D|,
sum of log h(y))``, so datasets are carried as :class:`SufficientSummary`
values and never as raw points.

Canonical parameters ``xi = (tau, nu)`` index members of the conjugate
family; the posterior after observing a summary is ``xi + (t_sum, count)``.
The log-partition ``B(xi)`` of each family is available in closed form (all
Gamma factors evaluated through log-gamma), which makes KL divergences,
exact log predictive densities and estimator diagnostics cheap and stable
even when likelihood products are as small as exp(-1e4).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln, psi
from scipy.stats import beta as beta_dist
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm as norm_dist

__all__ = [
    "DomainError",
    "NaturalParams",
    "SufficientSummary",
    "ConjugateModel",
    "NormalKnownVar",
    "ExponentialRate",
    "BinomialProb",
    "posterior_params",
]

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class DomainError(ValueError):
    """A canonical parameter or observation violates a model constraint."""


def _as_tau(tau) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"tau must be a scalar or 1-d vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class NaturalParams:
    """Canonical parameters ``(tau, nu)`` of a conjugate-family member."""

    tau: np.ndarray
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "tau", _as_tau(self.tau))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def dim(self) -> int:
        return self.tau.shape[0]

    def shifted(self, t_sum: np.ndarray, count: float) -> "NaturalParams":
        return NaturalParams(self.tau + t_sum, self.nu + count)

    def close_to(self, other: "NaturalParams", rtol=1e-12, atol=1e-12) -> bool:
        return np.allclose(self.tau, other.tau, rtol=rtol, atol=atol) and np.isclose(
            self.nu, other.nu, rtol=rtol, atol=atol
        )


@dataclass(frozen=True)
class SufficientSummary:
    """A dataset reduced to ``(sum of T(y), |D|, sum of log h(y))``.

    Summaries are additive under multiset union and scale under multiset
    repetition, which is all the downstream math ever needs.
    """

    t_sum: np.ndarray
    count: float
    log_h_sum: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "t_sum", _as_tau(self.t_sum))
        object.__setattr__(self, "count", float(self.count))
        object.__setattr__(self, "log_h_sum", float(self.log_h_sum))
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.count == 0 and (np.any(self.t_sum != 0.0) or self.log_h_sum != 0.0):
            raise ValueError("an empty summary must have zero t_sum and log_h_sum")

    @staticmethod
    def empty(dim: int = 1) -> "SufficientSummary":
        return SufficientSummary(np.zeros(dim), 0, 0.0)

    @property
    def dim(self) -> int:
        return self.t_sum.shape[0]

    def __add__(self, other: "SufficientSummary") -> "SufficientSummary":
        return SufficientSummary(
            self.t_sum + other.t_sum,
            self.count + other.count,
            self.log_h_sum + other.log_h_sum,
        )

    def scale(self, c: float) -> "SufficientSummary":
        """Summary of the multiset containing ``c`` copies of the data."""
        if c < 0:
            raise ValueError("multiset multiplicity must be non-negative")
        if c == 0:
            return SufficientSummary.empty(self.dim)
        return SufficientSummary(c * self.t_sum, c * self.count, c * self.log_h_sum)


def posterior_params(xi0: NaturalParams, summary: SufficientSummary) -> NaturalParams:
    """Conjugate update: prior parameters plus ``(t_sum, count)``."""
    return xi0.shifted(summary.t_sum, summary.count)


class ConjugateModel:
    """Shared behaviour of the three conjugate models.

    Subclasses supply the family ingredients (sufficient statistic, base
    measure, parameter map ``phi``, carrier ``A``, log-partition ``B``,
    domain checks and standard-form conversions); the generic exp-family
    algebra lives here.
    """

    dim: int = 1

    # -- family ingredients supplied by subclasses --------------------------

    def log_base(self, y):
        raise NotImplementedError

    def phi(self, z):
        raise NotImplementedError

    def carrier(self, z):
        """Per-observation log-partition ``A(z)``."""
        raise NotImplementedError

    def check_domain(self, xi: NaturalParams) -> None:
        raise NotImplementedError

    def log_partition(self, xi: NaturalParams) -> float:
        raise NotImplementedError

    def to_standard(self, xi: NaturalParams):
        raise NotImplementedError

    def kl(self, xi_a: NaturalParams, xi_b: NaturalParams) -> float:
        raise NotImplementedError

    def sample_posterior(self, xi: NaturalParams, count: int, rng: np.random.Generator):
        raise NotImplementedError

    def _check_support(self, points: np.ndarray) -> None:
        raise NotImplementedError

    def in_support(self, z):
        """Boolean mask of latent values inside the likelihood's parameter space."""
        raise NotImplementedError

    # -- generic operations --------------------------------------------------

    def in_domain(self, xi: NaturalParams) -> bool:
        try:
            self.check_domain(xi)
        except DomainError:
            return False
        return True

    def summarize(self, points) -> SufficientSummary:
        """Reduce raw observations to their sufficient summary (T(y) = y)."""
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            return SufficientSummary.empty(self.dim)
        if self.dim == 1:
            pts = pts.reshape(-1)
        else:
            pts = pts.reshape(-1, self.dim)
        self._check_support(pts)
        return SufficientSummary(
            pts.sum(axis=0) if pts.ndim > 1 else np.array([pts.sum()]),
            pts.shape[0],
            float(np.sum(self.log_base(pts))),
        )

    def loglik(self, z, summary: SufficientSummary):
        """``log p(D | z)`` from the summary; -inf outside the support.

        ``z`` may be a single latent value or a batch with the batch axis
        leading.
        """
        z = np.asarray(z, dtype=float)
        scalar_in = z.ndim == 0 if self.dim == 1 else z.ndim == 1
        zb = np.atleast_1d(z) if self.dim == 1 else np.atleast_2d(z)
        ok = self.in_support(zb)
        safe = np.where(
            ok if self.dim == 1 else ok[:, None], zb, self._safe_support_value()
        )
        tdot = (
            summary.t_sum[0] * self.phi(safe)
            if self.dim == 1
            else self.phi(safe) @ summary.t_sum
        )
        vals = tdot - summary.count * self.carrier(safe) + summary.log_h_sum
        vals = np.where(ok, vals, -np.inf)
        return float(vals[0]) if scalar_in else vals

    def _safe_support_value(self):
        """A point inside the support, used to mask invalid entries."""
        return 0.0

    def log_ppd_exact(
        self, xi0: NaturalParams, train: SufficientSummary, test: SufficientSummary
    ) -> float:
        """Exact log predictive density of ``test`` after conditioning on ``train``."""
        xi_train = posterior_params(xi0, train)
        xi_both = posterior_params(xi_train, test)
        return (
            self.log_partition(xi_both)
            - self.log_partition(xi_train)
            + test.log_h_sum
        )


@dataclass(frozen=True)
class NormalSpec:
    mean: np.ndarray
    var: float


@dataclass(frozen=True)
class GammaSpec:
    shape: float
    rate: float


@dataclass(frozen=True)
class BetaSpec:
    a: float
    b: float


class NormalKnownVar(ConjugateModel):
    """Normal likelihood with known variance ``sigma2`` and unknown mean.

    ``dim`` generalises the scalar model to a d-dimensional mean with
    isotropic known covariance ``sigma2 * I``; the scalar case is dim=1.
    """

    def __init__(self, sigma2: float, dim: int = 1):
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        self.sigma2 = float(sigma2)
        self.dim = int(dim)

    def __repr__(self):
        return f"NormalKnownVar(sigma2={self.sigma2}, dim={self.dim})"

    def log_base(self, y):
        y = np.asarray(y, dtype=float)
        sq = y**2 if self.dim == 1 else np.sum(y**2, axis=-1)
        return -sq / (2.0 * self.sigma2) - self.dim * (
            _HALF_LOG_2PI + 0.5 * np.log(self.sigma2)
        )

    def phi(self, z):
        return np.asarray(z, dtype=float) / self.sigma2

    def carrier(self, z):
        z = np.asarray(z, dtype=float)
        sq = z**2 if self.dim == 1 else np.sum(z**2, axis=-1)
        return sq / (2.0 * self.sigma2)

    def in_support(self, z):
        return np.isfinite(z) if self.dim == 1 else np.all(np.isfinite(z), axis=-1)

    def _check_support(self, points):
        if not np.all(np.isfinite(points)):
            bad = points[~np.isfinite(points)].ravel()[0]
            raise DomainError(f"non-finite Normal observation {bad!r}")

    def check_domain(self, xi: NaturalParams) -> None:
        if xi.dim != self.dim:
            raise DomainError(f"tau has dim {xi.dim}, model has dim {self.dim}")
        if not xi.nu > 0:
            raise DomainError(f"Normal conjugate family requires nu > 0, got nu={xi.nu}")

    def log_partition(self, xi: NaturalParams) -> float:
        self.check_domain(xi)
        return 0.5 * (
            self.dim * np.log(2.0 * np.pi * self.sigma2 / xi.nu)
            + float(xi.tau @ xi.tau) / (self.sigma2 * xi.nu)
        )

    def to_standard(self, xi: NaturalParams) -> NormalSpec:
        self.check_domain(xi)
        return NormalSpec(xi.tau / xi.nu, self.sigma2 / xi.nu)

    def kl(self, xi_a: NaturalParams, xi_b: NaturalParams) -> float:
        a, b = self.to_standard(xi_a), self.to_standard(xi_b)
        ratio = a.var / b.var
        sq = float(np.sum((b.mean - a.mean) ** 2))
        return 0.5 * (
            self.dim * (ratio - 1.0 - np.log(ratio)) + sq / b.var
        )

    def sample_posterior(self, xi, count, rng):
        spec = self.to_standard(xi)
        sd = np.sqrt(spec.var)
        if self.dim == 1:
            return spec.mean[0] + sd * rng.standard_normal(count)
        return spec.mean + sd * rng.standard_normal((count, self.dim))


class ExponentialRate(ConjugateModel):
    """Exponential likelihood with unknown rate; Gamma conjugate family."""

    dim = 1

    def __repr__(self):
        return "ExponentialRate()"

    def log_base(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def phi(self, z):
        return -np.asarray(z, dtype=float)

    def carrier(self, z):
        return -np.log(np.asarray(z, dtype=float))

    def in_support(self, z):
        return np.asarray(z) > 0

    def _safe_support_value(self):
        return 1.0

    def _check_support(self, points):
        if np.any(points < 0):
            bad = points[points < 0].ravel()[0]
            raise DomainError(f"negative Exponential observation {bad!r}")

    def check_domain(self, xi: NaturalParams) -> None:
        if xi.dim != 1:
            raise DomainError("Exponential model is one-dimensional")
        if not xi.tau[0] > 0:
            raise DomainError(f"requires tau > 0, got tau={xi.tau[0]}")
        if not xi.nu > -1:
            raise DomainError(f"requires nu > -1, got nu={xi.nu}")

    def log_partition(self, xi: NaturalParams) -> float:
        self.check_domain(xi)
        return float(gammaln(xi.nu + 1.0) - (xi.nu + 1.0) * np.log(xi.tau[0]))

    def to_standard(self, xi: NaturalParams) -> GammaSpec:
        self.check_domain(xi)
        shape, rate = xi.nu + 1.0, float(xi.tau[0])
        if shape <= 0 or rate <= 0:
            raise DomainError(f"degenerate Gamma(shape={shape}, rate={rate})")
        return GammaSpec(shape, rate)

    def kl(self, xi_a: NaturalParams, xi_b: NaturalParams) -> float:
        a, b = self.to_standard(xi_a), self.to_standard(xi_b)
        return float(
            (a.shape - b.shape) * psi(a.shape)
            - gammaln(a.shape)
            + gammaln(b.shape)
            + b.shape * (np.log(a.rate) - np.log(b.rate))
            + a.shape * (b.rate - a.rate) / a.rate
        )

    def sample_posterior(self, xi, count, rng):
        spec = self.to_standard(xi)
        return rng.gamma(spec.shape, 1.0 / spec.rate, size=count)


class BinomialProb(ConjugateModel):
    """Binomial likelihood with known trial count; Beta conjugate family."""

    dim = 1

    def __init__(self, n_trials: int):
        if n_trials < 1:
            raise ValueError("n_trials must be a positive integer")
        self.n_trials = int(n_trials)

    def __repr__(self):
        return f"BinomialProb(n_trials={self.n_trials})"

    def log_base(self, y):
        y = np.asarray(y, dtype=float)
        n = self.n_trials
        return gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)

    def phi(self, z):
        z = np.asarray(z, dtype=float)
        return np.log(z) - np.log1p(-z)

    def carrier(self, z):
        z = np.asarray(z, dtype=float)
        return -self.n_trials * np.log1p(-z)

    def in_support(self, z):
        z = np.asarray(z)
        return (z > 0) & (z < 1)

    def _safe_support_value(self):
        return 0.5

    def _check_support(self, points):
        bad = (points < 0) | (points > self.n_trials) | (points != np.round(points))
        if np.any(bad):
            val = points[bad].ravel()[0]
            raise DomainError(
                f"Binomial observation {val!r} not an integer in [0, {self.n_trials}]"
            )

    def check_domain(self, xi: NaturalParams) -> None:
        if xi.dim != 1:
            raise DomainError("Binomial model is one-dimensional")
        t, n = float(xi.tau[0]), self.n_trials
        if not t > -1:
            raise DomainError(f"requires tau > -1, got tau={t}")
        if not n * xi.nu - t > -1:
            raise DomainError(f"requires n*nu - tau > -1, got {n * xi.nu - t}")
        if not n * xi.nu > -2:
            raise DomainError(f"requires n*nu > -2, got {n * xi.nu}")

    def log_partition(self, xi: NaturalParams) -> float:
        self.check_domain(xi)
        t, n = float(xi.tau[0]), self.n_trials
        return float(
            gammaln(t + 1.0) + gammaln(n * xi.nu - t + 1.0) - gammaln(n * xi.nu + 2.0)
        )

    def to_standard(self, xi: NaturalParams) -> BetaSpec:
        self.check_domain(xi)
        t = float(xi.tau[0])
        a, b = t + 1.0, self.n_trials * xi.nu - t + 1.0
        if a <= 0 or b <= 0:
            raise DomainError(f"degenerate Beta(a={a}, b={b})")
        return BetaSpec(a, b)

    def kl(self, xi_a: NaturalParams, xi_b: NaturalParams) -> float:
        p, q = self.to_standard(xi_a), self.to_standard(xi_b)
        return float(
            betaln(q.a, q.b)
            - betaln(p.a, p.b)
            + (p.a - q.a) * psi(p.a)
            + (p.b - q.b) * psi(p.b)
            + (q.a - p.a + q.b - p.b) * psi(p.a + p.b)
        )

    def sample_posterior(self, xi, count, rng):
        spec = self.to_standard(xi)
        return rng.beta(spec.a, spec.b, size=count)


def standard_logpdf(model: ConjugateModel, xi: NaturalParams, z):
    """Log density of the standard-form distribution (scipy-backed helper)."""
    spec = model.to_standard(xi)
    if isinstance(model, NormalKnownVar):
        if model.dim == 1:
            return norm_dist.logpdf(z, loc=spec.mean[0], scale=np.sqrt(spec.var))
        z = np.asarray(z, dtype=float)
        return np.sum(
            norm_dist.logpdf(z, loc=spec.mean, scale=np.sqrt(spec.var)), axis=-1
        )
    if isinstance(model, ExponentialRate):
        return gamma_dist.logpdf(z, a=spec.shape, scale=1.0 / spec.rate)
    if isinstance(model, BinomialProb):
        return beta_dist.logpdf(z, spec.a, spec.b)
    raise TypeError(f"unknown model {model!r}")
