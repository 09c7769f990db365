"""Signal-to-noise ratios of Monte Carlo predictive-density estimators.

The SNR of the K-sample estimator is ``sqrt(K) / sqrt(exp(2 delta) - 1)``
where ``delta`` is half the log ratio of the estimator's second moment to
its squared first moment.  This module computes ``delta`` in every regime
where it is available in closed form:

* exact conjugate inference (three log-partition evaluations),
* conjugate-family approximations of the posterior,
* the Gaussian / Bayesian-CLT large-data approximation,
* arbitrary Gaussian posteriors (two closed-form KL divergences),

plus grid sweeps that power SNR contour plots.

Every conjugate ``delta`` is produced in two algebraically equivalent forms,
one from log-partitions and one from KL divergences, and the pair is checked
against each other at construction; disagreement signals an implementation
bug rather than user error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .conjugate import (
    ConjugateModel,
    DomainError,
    NaturalParams,
    SufficientSummary,
    posterior_params,
)

__all__ = [
    "LOG_BRANCH_DELTA",
    "NEGATIVE_DELTA_TOL",
    "DeltaBreakdown",
    "ContourCell",
    "snr_from_delta",
    "log10_snr_from_delta",
    "delta_exact",
    "delta_approx",
    "delta_clt",
    "delta_gaussians",
    "gaussian_kl",
    "contour_grid",
]

# exp(2*delta) overflows float64 just above delta = 354.9; switch to the
# asymptotic log form safely below that.
LOG_BRANCH_DELTA = 350.0

# Jensen slop: b-form values in [-NEGATIVE_DELTA_TOL, 0) are clamped to zero,
# anything more negative is a bug and raises.
NEGATIVE_DELTA_TOL = 1e-12

_FORM_AGREEMENT_RTOL = 1e-8


class DeltaFormMismatch(AssertionError):
    """The log-partition and KL forms of delta disagree beyond tolerance."""


@dataclass(frozen=True)
class DeltaBreakdown:
    """Both closed forms of delta for one (posterior, test-data) pair.

    ``delta`` is the log-partition value (``b_form``) clamped at zero;
    ``kl_left`` and ``kl_right`` are the two divergences whose mean must
    reproduce it to 1e-8 relative.
    """

    delta: float
    kl_left: float
    kl_right: float
    b_form: float

    def __post_init__(self):
        kl_mean = 0.5 * (self.kl_left + self.kl_right)
        tol = _FORM_AGREEMENT_RTOL * max(1.0, abs(self.b_form))
        if abs(kl_mean - self.b_form) > tol:
            raise DeltaFormMismatch(
                f"delta forms disagree: b-form {self.b_form!r}, "
                f"KL mean {kl_mean!r} (tol {tol:.3e})"
            )


def snr_from_delta(delta: float, K: int) -> float:
    """SNR of the K-sample estimator; +inf for a zero-variance estimator.

    Written as sqrt(K) times the single-sample SNR so the root-K scaling law
    holds exactly, not merely to rounding.
    """
    delta = float(delta)
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    if delta == 0.0:
        return math.inf
    if delta > LOG_BRANCH_DELTA:
        # exp(2 delta) - 1 == exp(2 delta) to double precision here
        single = math.exp(-delta)
    else:
        single = 1.0 / math.sqrt(math.expm1(2.0 * delta))
    return math.sqrt(K) * single


def log10_snr_from_delta(delta: float, K: int) -> float:
    """log10 of :func:`snr_from_delta`, exact far past float64 underflow."""
    delta = float(delta)
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    log_e2d = 2.0 * delta if delta > LOG_BRANCH_DELTA else math.log(math.expm1(2.0 * delta))
    return (0.5 * math.log(K) - 0.5 * log_e2d) / math.log(10.0)


def _breakdown(model: ConjugateModel, base: NaturalParams, test: SufficientSummary) -> DeltaBreakdown:
    """Delta for sampling from ``s(z | base)`` and scoring ``test``."""
    mid = base.shifted(test.t_sum, test.count)
    far = base.shifted(2.0 * test.t_sum, 2.0 * test.count)
    b_base = model.log_partition(base)
    b_mid = model.log_partition(mid)
    b_far = model.log_partition(far)
    b_form = 0.5 * (b_base + b_far) - b_mid
    if b_form < -NEGATIVE_DELTA_TOL:
        raise FloatingPointError(
            f"delta = {b_form!r} is negative beyond floating-point slop; "
            "this indicates a log-partition bug"
        )
    return DeltaBreakdown(
        delta=max(b_form, 0.0),
        kl_left=model.kl(mid, base),
        kl_right=model.kl(mid, far),
        b_form=b_form,
    )


def delta_exact(
    model: ConjugateModel,
    xi0: NaturalParams,
    train: SufficientSummary,
    test: SufficientSummary,
) -> DeltaBreakdown:
    """Delta under exact inference: the posterior after ``train`` is the sampler."""
    return _breakdown(model, posterior_params(xi0, train), test)


def delta_approx(
    model: ConjugateModel, eta: NaturalParams, test: SufficientSummary
) -> DeltaBreakdown:
    """Delta when sampling from the conjugate-family member ``eta``.

    With ``eta`` equal to the exact posterior parameters this reproduces
    :func:`delta_exact` bit for bit.
    """
    return _breakdown(model, eta, test)


def delta_clt(d: int, n_train: float, n_test: float) -> float:
    """Large-data Gaussian approximation of delta.

    Grows linearly in the latent dimension and logarithmically in the
    test-to-train size ratio; assumes matched statistics across the sets.
    """
    if d <= 0 or n_train <= 0 or n_test <= 0:
        raise ValueError("d, n_train and n_test must all be positive")
    r = n_test / n_train
    return 0.5 * d * (math.log1p(r) - 0.5 * math.log1p(2.0 * r))


def _chol_or_raise(S: np.ndarray, name: str) -> np.ndarray:
    try:
        return cholesky(np.asarray(S, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"covariance {name} is not positive definite") from exc


def gaussian_kl(mu0, S0, mu1, S1, chol0=None, chol1=None) -> float:
    """KL(N(mu0, S0) || N(mu1, S1)) via Cholesky factors."""
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    d = mu0.shape[0]
    L0 = _chol_or_raise(S0, "S0") if chol0 is None else chol0
    L1 = _chol_or_raise(S1, "S1") if chol1 is None else chol1
    # tr(S1^-1 S0) = ||L1^-1 L0||_F^2
    W = solve_triangular(L1, L0, lower=True)
    trace = float(np.sum(W**2))
    v = solve_triangular(L1, mu1 - mu0, lower=True)
    quad = float(v @ v)
    logdet0 = 2.0 * float(np.sum(np.log(np.diag(L0))))
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(L1))))
    return 0.5 * (trace + quad - d + logdet1 - logdet0)


def delta_gaussians(mu1, S1, mu2, S2, mu3, S3) -> float:
    """Delta when all three posteriors involved are Gaussian.

    ``(mu3, S3)`` is the middle posterior (train plus one copy of the test
    data); ``(mu1, S1)`` and ``(mu2, S2)`` are the train-only and
    train-plus-two-copies posteriors.
    """
    L1 = _chol_or_raise(S1, "S1")
    L2 = _chol_or_raise(S2, "S2")
    L3 = _chol_or_raise(S3, "S3")
    val = 0.5 * gaussian_kl(mu3, S3, mu1, S1, chol0=L3, chol1=L1) + 0.5 * gaussian_kl(
        mu3, S3, mu2, S2, chol0=L3, chol1=L2
    )
    if val < -1e-9:
        raise FloatingPointError(f"Gaussian delta = {val!r} is negative")
    return max(val, 0.0)


@dataclass(frozen=True)
class ContourCell:
    """One (test mean statistic, test size) cell of an SNR contour grid."""

    test_mean: float
    test_size: float
    delta: float | None
    log10_snr: float | None


def contour_grid(
    model: ConjugateModel,
    train: SufficientSummary,
    xi0: NaturalParams,
    mean_grid,
    size_grid,
    K: int = 1,
) -> list[ContourCell]:
    """Sweep delta and log10 SNR over a grid of synthetic test summaries.

    Cell ``(mean, size)`` scores a test set with summary ``(mean * size,
    size)``; the base-measure sum is irrelevant to delta and set to zero.
    Cells whose parameters leave the conjugate family's domain are recorded
    with ``None`` entries rather than raising.  Cells are emitted mean-major
    in deterministic order.
    """
    cells: list[ContourCell] = []
    for mean in mean_grid:
        for size in size_grid:
            test = SufficientSummary(
                np.full(model.dim, float(mean) * float(size)), float(size), 0.0
            )
            try:
                bd = delta_exact(model, xi0, train, test)
            except DomainError:
                cells.append(ContourCell(float(mean), float(size), None, None))
                continue
            if bd.delta == 0.0:
                log_snr = math.inf
            else:
                log_snr = log10_snr_from_delta(bd.delta, K)
            cells.append(ContourCell(float(mean), float(size), bd.delta, log_snr))
    return cells
