"""Monte Carlo estimators of log predictive densities and their diagnostics.

Two estimators: the naive average of likelihoods over posterior samples, and
the importance-sampled average under a proposal.  Both work entirely in
log space (a single likelihood value here can be exp(-1e4)) and stream
their inner samples in bounded chunks, so K = 1e6 never materializes a
K-by-d array.

The learned-IS pipeline wires them together: build the optimal-proposal
target, fit a Gaussian proposal to it by the importance-weighted bound, and
estimate with the fitted proposal.

Empirical summaries follow the S-outer-replicates scheme: S independent
log-estimates at fixed inner size K, reduced to a mean log estimate and a
shifted-log signal-to-noise ratio that cannot overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .targets import DiffTarget, lis_target
from .vi import (
    FullRankGaussian,
    TrainConfig,
    iw_elbo_from_eps,
    laplace_candidate,
    sample_reparam,
    train,
)

__all__ = [
    "LogEstimateBatch",
    "EstimatorReport",
    "naive_log_rk",
    "is_log_rk",
    "select_proposal_init",
    "evaluate_lis",
    "empirical_report",
    "collect_naive",
    "collect_is",
]

# cap on elements drawn per chunk; keeps million-sample runs in ~32 MB
_CHUNK_ELEMS = 1 << 22


def _chunk_rows(K: int, dim: int) -> int:
    return max(1, min(K, _CHUNK_ELEMS // max(dim, 1)))


def _combine_lse(total: float, chunk_lse: float) -> float:
    if math.isinf(total) and total < 0:
        return chunk_lse
    return float(np.logaddexp(total, chunk_lse))


def naive_log_rk(
    sampler: Callable[[int, np.random.Generator], np.ndarray],
    loglik: Callable[[np.ndarray], np.ndarray],
    K: int,
    rng: np.random.Generator,
    dim: int = 1,
) -> float:
    """log of the K-sample average likelihood under ``sampler``.

    ``sampler(count, rng)`` draws posterior (or approximate-posterior)
    samples; ``loglik`` maps a batch of draws to log likelihood values.
    Emits a warning and returns -inf when every draw has zero likelihood.
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    total = -math.inf
    left = K
    rows = _chunk_rows(K, dim)
    while left > 0:
        k = min(rows, left)
        vals = np.asarray(loglik(sampler(k, rng)), dtype=float)
        with np.errstate(invalid="ignore"):
            chunk = float(np.max(vals))
            if chunk > -math.inf:
                chunk += math.log(np.sum(np.exp(vals - chunk)))
        total = _combine_lse(total, chunk) if chunk > -math.inf else total
        left -= k
    if total == -math.inf:
        warnings.warn("all sampled likelihoods were zero; estimate is -inf")
        return -math.inf
    return total - math.log(K)


def _is_log_weights(r: FullRankGaussian, lis_tgt: DiffTarget, z: np.ndarray) -> np.ndarray:
    if lis_tgt.parts is not None:
        q_part, lik_part = lis_tgt.parts
        # ratio first: when the proposal coincides with the sampler density
        # the correction cancels exactly and only the likelihood remains
        return lik_part.logdensity(z) + (q_part.logdensity(z) - r.logdensity(z))
    return lis_tgt.logdensity(z) - r.logdensity(z)


def is_log_rk(
    r: FullRankGaussian, lis_tgt: DiffTarget, K: int, rng: np.random.Generator
) -> float:
    """log of the K-sample importance-sampled likelihood average under ``r``."""
    if K < 1:
        raise ValueError("K must be a positive integer")
    if r.dim != lis_tgt.dim:
        raise ValueError("proposal and target dimensions disagree")
    total = -math.inf
    left = K
    rows = _chunk_rows(K, r.dim)
    while left > 0:
        k = min(rows, left)
        z = sample_reparam(r, rng.standard_normal((k, r.dim)))
        lw = np.asarray(_is_log_weights(r, lis_tgt, z), dtype=float)
        chunk = float(np.max(lw))
        if chunk > -math.inf:
            chunk += math.log(np.sum(np.exp(lw - chunk)))
            total = _combine_lse(total, chunk)
        left -= k
    if total == -math.inf:
        warnings.warn("all importance weights were zero; estimate is -inf")
        return -math.inf
    return total - math.log(K)


def select_proposal_init(
    lis_tgt: DiffTarget,
    M: int,
    rng: np.random.Generator,
    extra: FullRankGaussian | None = None,
    budget: int = 1000,
) -> FullRankGaussian:
    """Pick the best starting proposal by its sampled importance-weighted bound.

    Candidates are the Laplace fit of the target (when it succeeds), a
    standard normal, and optionally the approximate posterior itself; all
    are scored on common random numbers with roughly ``budget`` draws.
    """
    candidates = [FullRankGaussian.standard(lis_tgt.dim)]
    lap = laplace_candidate(lis_tgt)
    if lap is not None:
        candidates.append(lap)
    if extra is not None:
        candidates.append(extra)
    reps = max(1, budget // M)
    eps = rng.standard_normal((reps, M, lis_tgt.dim))
    scores = [
        float(np.mean([iw_elbo_from_eps(c, lis_tgt, e) for e in eps]))
        for c in candidates
    ]
    return candidates[int(np.argmax(scores))]


def evaluate_lis(
    q_target: DiffTarget,
    loglik_target: DiffTarget,
    config: TrainConfig,
    K: int,
    rng: np.random.Generator,
    init_from: FullRankGaussian | None = None,
) -> tuple[FullRankGaussian, float]:
    """Learned importance sampling end to end.

    Builds the optimal-proposal target ``p(D* | z) q(z)``, fits a full-rank
    Gaussian proposal to it by maximizing the M-sample importance-weighted
    bound, and returns the fitted proposal together with one K-sample
    importance-sampled log estimate.  Initialization selection, training and
    estimation consume disjoint RNG substreams.
    """
    lis = lis_target(q_target, loglik_target)
    rng_init, rng_train, rng_est = rng.spawn(3)
    init = select_proposal_init(lis, config.M, rng_init, extra=init_from)
    result = train(lis, init, "iwelbo", config, rng_train)
    return result.dist, is_log_rk(result.dist, lis, K, rng_est)


@dataclass(frozen=True)
class LogEstimateBatch:
    """S independent log estimates, each from K inner samples."""

    values: np.ndarray
    K: int
    S: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.S:
            raise ValueError(f"S={self.S} but {values.shape[0]} values given")
        if np.any(np.isnan(values)) or np.any(values == np.inf):
            raise ValueError("log estimates must be finite or -inf")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class EstimatorReport:
    """Mean log estimate and shifted-log empirical SNR of a batch."""

    mean_log_r: float
    log10_snr_hat: float
    K: int
    S: int


def empirical_report(batch: LogEstimateBatch) -> EstimatorReport:
    """Summarize replicates: mean log estimate and log10 empirical SNR.

    The SNR is the replicate mean of exp(values) over its Bessel-corrected
    standard deviation, computed after subtracting the max so nothing
    overflows; the ratio is shift-invariant so the subtraction cancels.
    Identical replicates give the +inf sentinel.
    """
    if batch.S < 2:
        raise ValueError("need at least two replicates for an SNR estimate")
    values = batch.values
    mean_log_r = float(np.mean(values))
    a = float(np.max(values))
    if a == -math.inf:
        return EstimatorReport(mean_log_r, math.nan, batch.K, batch.S)
    e = np.exp(values - a)
    m = float(np.mean(e))
    s = float(np.std(e, ddof=1))
    if s == 0.0:
        return EstimatorReport(mean_log_r, math.inf, batch.K, batch.S)
    return EstimatorReport(
        mean_log_r, (math.log(m) - math.log(s)) / math.log(10.0), batch.K, batch.S
    )


def collect_naive(
    sampler, loglik, K: int, S: int, rng: np.random.Generator, dim: int = 1
) -> LogEstimateBatch:
    """S replicates of the naive estimator on per-replicate substreams."""
    streams = rng.spawn(S)
    values = np.array(
        [naive_log_rk(sampler, loglik, K, streams[s], dim=dim) for s in range(S)]
    )
    return LogEstimateBatch(values, K, S)


def collect_is(
    r: FullRankGaussian, lis_tgt: DiffTarget, K: int, S: int, rng: np.random.Generator
) -> LogEstimateBatch:
    """S replicates of the IS estimator on per-replicate substreams."""
    streams = rng.spawn(S)
    values = np.array([is_log_rk(r, lis_tgt, K, streams[s]) for s in range(S)])
    return LogEstimateBatch(values, K, S)
