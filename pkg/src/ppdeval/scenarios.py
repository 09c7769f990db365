"""Synthetic experiment scenarios, runners and file emission.

Generators forward-sample the exponential-family, linear-regression and
logistic-regression setups; every generator is a pure function of
``(spec, seed)`` through the package's keyed Philox substreams, so
regeneration is byte-identical.  Runners bind the generated data to the
estimators and analytics and reduce the results to plot-ready rows, which
the writers serialize as CSV or JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import estimators as est
from . import linreg as lr
from . import snr as snr_mod
from . import targets as tg
from .conjugate import (
    BinomialProb,
    ConjugateModel,
    ExponentialRate,
    NaturalParams,
    NormalKnownVar,
    SufficientSummary,
    posterior_params,
)
from .rng import substream
from .vi import FullRankGaussian, TrainConfig, laplace_init, train

__all__ = [
    "RunSpec",
    "ExpFamScenario",
    "LinRegScenario",
    "LogRegScenario",
    "expfam_model",
    "expfam_prior",
    "gen_expfam",
    "expfam_scenario",
    "gen_linreg",
    "gen_logreg",
    "run_table",
    "run_contour",
    "run_clt_check",
    "run_linreg_error_curves",
    "write_rows",
    "read_rows",
]

# stream identifiers: (family, scenario, role) keys every generator/runner draw
_FAM_EXP, _FAM_LINREG, _FAM_LOGREG, _FAM_RUN = 0, 1, 2, 3
_ROLE_TRAIN, _ROLE_TEST = 0, 1

EXPFAM_MODEL_NAMES = ("normal", "exp", "binomial")
LINREG_SCENARIO_NAMES = ("baseline", "mismatch", "testsize", "dims")
LOGREG_SCENARIO_NAMES = LINREG_SCENARIO_NAMES


@dataclass(frozen=True)
class RunSpec:
    """Estimation and training budget for table/curve runners."""

    K_naive: int = 10**6
    K_is: int = 10**3
    S: int = 1000
    runs: int = 10
    iters: int = 1000
    learning_rate: float = 1e-3
    M: int = 16
    elbo_grad_batch: int = 16
    iw_grad_batch: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("K_naive", "K_is", "S", "runs", "iters", "M",
                     "elbo_grad_batch", "iw_grad_batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def elbo_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.iters, self.learning_rate, self.M,
                           self.elbo_grad_batch, seed)

    def iw_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.iters, self.learning_rate, self.M,
                           self.iw_grad_batch, seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSpec":
        return cls(**data)

    def override(self, **kwargs) -> "RunSpec":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


# ---------------------------------------------------------------------------
# exponential-family scenarios
# ---------------------------------------------------------------------------

_EXPFAM_ID = {"normal": 0, "exp": 1, "binomial": 2}

# (train sampler params, test sampler params); 100 points each side
_EXPFAM_TRAIN = {"normal": (10.0, 1.0), "exp": 0.1, "binomial": (100, 0.1)}
_EXPFAM_TEST = {"normal": (5.0, 1.0), "exp": 0.025, "binomial": (100, 0.4)}
_EXPFAM_COUNT = 100


def expfam_model(name: str) -> ConjugateModel:
    if name == "normal":
        return NormalKnownVar(sigma2=1.0)
    if name == "exp":
        return ExponentialRate()
    if name == "binomial":
        return BinomialProb(n_trials=100)
    raise ValueError(f"unknown exponential-family model {name!r}")


def expfam_prior(name: str) -> NaturalParams:
    """Default priors: N(0,1), Gamma(1,1) and Beta(1,1) respectively."""
    if name == "normal":
        return NaturalParams(0.0, 1.0)
    if name == "exp":
        return NaturalParams(1.0, 0.0)
    if name == "binomial":
        return NaturalParams(0.0, 0.0)
    raise ValueError(f"unknown exponential-family model {name!r}")


def gen_expfam(name: str, which: str, seed: int) -> np.ndarray:
    """100 train or test observations for the named scalar model."""
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    role = _ROLE_TRAIN if which == "train" else _ROLE_TEST
    rng = substream(seed, _FAM_EXP, _EXPFAM_ID[name], role)
    params = (_EXPFAM_TRAIN if which == "train" else _EXPFAM_TEST)[name]
    if name == "normal":
        mean, sd = params
        return rng.normal(mean, sd, _EXPFAM_COUNT)
    if name == "exp":
        return rng.exponential(1.0 / params, _EXPFAM_COUNT)
    n, p = params
    return rng.binomial(n, p, _EXPFAM_COUNT).astype(float)


@dataclass(frozen=True)
class ExpFamScenario:
    name: str
    model: ConjugateModel
    xi0: NaturalParams
    train_points: np.ndarray
    test_points: np.ndarray
    seed: int

    @property
    def train_summary(self) -> SufficientSummary:
        return self.model.summarize(self.train_points)

    @property
    def test_summary(self) -> SufficientSummary:
        return self.model.summarize(self.test_points)


def expfam_scenario(name: str, seed: int) -> ExpFamScenario:
    return ExpFamScenario(
        name=name,
        model=expfam_model(name),
        xi0=expfam_prior(name),
        train_points=gen_expfam(name, "train", seed),
        test_points=gen_expfam(name, "test", seed),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# linear-regression scenarios
# ---------------------------------------------------------------------------

_LINREG_PARAMS = {
    # (n, d, mismatch value added to every response, copies m)
    "baseline": (1000, 10, 2.0, 1),
    "mismatch": (1000, 10, 10.0, 1),
    "testsize": (1000, 10, 2.0, 10),
    "dims": (1000, 100, 2.0, 1),
}


@dataclass(frozen=True)
class LinRegScenario:
    name: str
    problem: lr.LinRegProblem
    Xstar: np.ndarray
    ystar: np.ndarray
    mismatch: float
    m: int
    seed: int


def gen_linreg(name: str, seed: int) -> LinRegScenario:
    """Forward-sampled regression data with a mismatched-copy test set."""
    if name not in _LINREG_PARAMS:
        raise ValueError(f"unknown linear-regression scenario {name!r}")
    n, d, mismatch, m = _LINREG_PARAMS[name]
    rng = substream(seed, _FAM_LINREG, LINREG_SCENARIO_NAMES.index(name))
    X = rng.standard_normal((n, d))
    z = rng.standard_normal(d)
    y = X @ z + rng.standard_normal(n)
    problem = lr.LinRegProblem(X, y, 1.0, np.zeros(d), np.eye(d))
    Xstar, ystar = lr.make_mismatch_copies(X, y, np.full(n, mismatch), m)
    return LinRegScenario(name, problem, Xstar, ystar, mismatch, m, seed)


# ---------------------------------------------------------------------------
# logistic-regression scenarios
# ---------------------------------------------------------------------------

_LOGREG_PARAMS = {
    # (n, d, flipped fraction, copies m)
    "baseline": (1000, 10, 0.1, 1),
    "mismatch": (1000, 10, 1.0, 1),
    "testsize": (1000, 10, 0.1, 10),
    "dims": (1000, 100, 0.1, 1),
}


@dataclass(frozen=True)
class LogRegScenario:
    """Train data plus the flipped/copied test construction.

    The test set is m stacked copies of ``(X, ystar_base)``; estimators
    exploit the copy structure by scaling the base likelihood by m instead
    of materializing the stack.
    """

    name: str
    X: np.ndarray
    y: np.ndarray
    ystar_base: np.ndarray
    flip: float
    m: int
    seed: int

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def Xstar(self) -> np.ndarray:
        return np.tile(self.X, (self.m, 1))

    @property
    def ystar(self) -> np.ndarray:
        return np.tile(self.ystar_base, self.m)


def gen_logreg(name: str, seed: int) -> LogRegScenario:
    """Forward-sampled logistic data; mismatch flips the first labels."""
    if name not in _LOGREG_PARAMS:
        raise ValueError(f"unknown logistic-regression scenario {name!r}")
    n, d, flip, m = _LOGREG_PARAMS[name]
    rng = substream(seed, _FAM_LOGREG, LOGREG_SCENARIO_NAMES.index(name))
    X = rng.standard_normal((n, d))
    z = rng.standard_normal(d)
    probs = 1.0 / (1.0 + np.exp(-(X @ z)))
    y = (rng.random(n) < probs).astype(float)
    ystar = y.copy()
    n_flip = int(math.floor(flip * n))
    ystar[:n_flip] = 1.0 - ystar[:n_flip]
    return LogRegScenario(name, X, y, ystar, flip, m, seed)


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _scaled_target(target: tg.DiffTarget, c: float) -> tg.DiffTarget:
    hess = None
    if target.hessian is not None:
        hess = lambda u: c * target.hessian(u)
    return tg.DiffTarget(
        target.dim,
        lambda u: c * target.logdensity(u),
        lambda u: c * target.gradient(u),
        hess,
    )


def log_ppd_q_quadrature(
    q: FullRankGaussian, loglik_target: tg.DiffTarget, width: float = 14.0, points: int = 8001
) -> float:
    """log integral of exp(loglik + log q) for a one-dimensional Gaussian q."""
    if q.dim != 1:
        raise ValueError("quadrature oracle is one-dimensional")
    sd = float(q.scale_tril()[0, 0])
    us = np.linspace(q.mu[0] - width * sd, q.mu[0] + width * sd, points)
    grid = us[:, None]
    lf = loglik_target.logdensity(grid) + q.logdensity(grid)
    a = float(np.max(lf))
    return a + math.log(np.trapezoid(np.exp(lf - a), us))


def _summary_stats(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(np.mean(arr)), float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0


def _table_row(scenario, mode, estimator, K, spec, reports, oracle_log_ppd, oracle_delta):
    means = [r.mean_log_r for r in reports]
    snrs = [r.log10_snr_hat for r in reports]
    mean, mean_sd = _summary_stats(means)
    snr, snr_sd = _summary_stats(snrs)
    return {
        "scenario": scenario,
        "mode": mode,
        "estimator": estimator,
        "K": K,
        "S": spec.S,
        "runs": spec.runs,
        "mean_log_r": mean,
        "mean_log_r_sd": mean_sd,
        "log10_snr": snr,
        "log10_snr_sd": snr_sd,
        "oracle_log_ppd": oracle_log_ppd,
        "oracle_delta": oracle_delta,
    }


def _run_expfam_table(scn: ExpFamScenario, spec: RunSpec, mode: str) -> list[dict]:
    model, xi0 = scn.model, scn.xi0
    train_s, test_s = scn.train_summary, scn.test_summary
    xi_post = posterior_params(xi0, train_s)
    oracle_ppd = model.log_ppd_exact(xi0, train_s, test_s)
    loglik_target = tg.conjugate_loglik_target(model, test_s)

    if mode == "exact":
        oracle_delta = snr_mod.delta_exact(model, xi0, train_s, test_s).delta
        q_target = tg.conjugate_posterior_target(model, xi_post)
        q_init = None

        def naive_sampler(k, rng):
            return model.sample_posterior(xi_post, k, rng)

        def naive_loglik(z):
            return model.loglik(z, test_s)

        oracle_col = oracle_ppd
    else:
        joint = tg.conjugate_joint_target(model, xi0, train_s)
        rng_fit = substream(spec.seed, _FAM_RUN, _EXPFAM_ID[scn.name], 0)
        init = laplace_init(joint, rng_fit)
        q = train(joint, init, "elbo", spec.elbo_config(), rng_fit).dist
        oracle_delta = None
        q_target = q.as_target()
        q_init = q

        def naive_sampler(k, rng):
            return q.sample(k, rng)

        def naive_loglik(u):
            return loglik_target.logdensity(u)

        oracle_col = log_ppd_q_quadrature(q, loglik_target)

    naive_reports, lis_reports = [], []
    for run in range(spec.runs):
        rng_n = substream(spec.seed, _FAM_RUN, _EXPFAM_ID[scn.name], 1, run)
        batch = est.collect_naive(
            naive_sampler, naive_loglik, spec.K_naive, spec.S, rng_n, dim=model.dim
        )
        naive_reports.append(est.empirical_report(batch))

        rng_l = substream(spec.seed, _FAM_RUN, _EXPFAM_ID[scn.name], 2, run)
        r, _ = est.evaluate_lis(
            q_target, loglik_target, spec.iw_config(), spec.K_is, rng_l, init_from=q_init
        )
        lis = tg.lis_target(q_target, loglik_target)
        batch = est.collect_is(r, lis, spec.K_is, spec.S, rng_l.spawn(1)[0])
        lis_reports.append(est.empirical_report(batch))

    return [
        _table_row(scn.name, mode, "naive", spec.K_naive, spec, naive_reports,
                   oracle_col, oracle_delta),
        _table_row(scn.name, mode, "lis", spec.K_is, spec, lis_reports,
                   oracle_col, oracle_delta),
    ]


def _quad_program_values(program, K, S, rng, dim):
    """S replicates of the naive estimator under a whitened quadratic."""
    const, lin, lam = program

    def sampler(k, r):
        return r.standard_normal((k, dim))

    def loglik(eta):
        return const + eta @ lin - 0.5 * (eta**2) @ lam

    batch = est.collect_naive(sampler, loglik, K, S, rng, dim=dim)
    return batch


def _run_linreg_table(scn: LinRegScenario, spec: RunSpec) -> list[dict]:
    problem = scn.problem
    post = lr.posterior(problem)
    oracle_ppd = lr.log_ppd_exact_linreg(problem, scn.Xstar, scn.ystar)
    oracle_delta = lr.delta_exact_linreg(problem, scn.Xstar, scn.ystar)
    d = problem.dim
    program = lr.whitened_loglik_quadratic(post, scn.Xstar, scn.ystar, problem.sigma2)
    q_target = tg.gaussian_target(post.mean, post.chol)
    loglik_target = tg.linreg_loglik_target(scn.Xstar, scn.ystar, problem.sigma2)
    scn_id = LINREG_SCENARIO_NAMES.index(scn.name)

    naive_reports, lis_reports = [], []
    for run in range(spec.runs):
        rng_n = substream(spec.seed, _FAM_RUN, 10 + scn_id, 1, run)
        batch = _quad_program_values(program, spec.K_naive, spec.S, rng_n, d)
        naive_reports.append(est.empirical_report(batch))

        rng_l = substream(spec.seed, _FAM_RUN, 10 + scn_id, 2, run)
        q_init = FullRankGaussian.from_mean_chol(post.mean, post.chol)
        r, _ = est.evaluate_lis(
            q_target, loglik_target, spec.iw_config(), spec.K_is, rng_l, init_from=q_init
        )
        lis = tg.lis_target(q_target, loglik_target)
        batch = est.collect_is(r, lis, spec.K_is, spec.S, rng_l.spawn(1)[0])
        lis_reports.append(est.empirical_report(batch))

    return [
        _table_row(scn.name, "exact", "naive", spec.K_naive, spec, naive_reports,
                   oracle_ppd, oracle_delta),
        _table_row(scn.name, "exact", "lis", spec.K_is, spec, lis_reports,
                   oracle_ppd, oracle_delta),
    ]


def fit_logreg_posterior(scn: LogRegScenario, spec: RunSpec) -> FullRankGaussian:
    """Full-rank Gaussian fit of the logistic posterior by the plain ELBO."""
    joint = tg.logreg_joint_target(
        scn.X, scn.y, np.zeros(scn.dim), np.eye(scn.dim)
    )
    scn_id = LOGREG_SCENARIO_NAMES.index(scn.name)
    rng_fit = substream(spec.seed, _FAM_RUN, 20 + scn_id, 0)
    init = laplace_init(joint, rng_fit)
    return train(joint, init, "elbo", spec.elbo_config(), rng_fit).dist


def _run_logreg_table(scn: LogRegScenario, spec: RunSpec) -> list[dict]:
    q = fit_logreg_posterior(scn, spec)
    base_lik = tg.logreg_loglik_target(scn.X, scn.ystar_base)
    loglik_target = _scaled_target(base_lik, scn.m) if scn.m != 1 else base_lik
    q_target = q.as_target()
    scn_id = LOGREG_SCENARIO_NAMES.index(scn.name)

    naive_reports, lis_reports = [], []
    for run in range(spec.runs):
        rng_n = substream(spec.seed, _FAM_RUN, 20 + scn_id, 1, run)
        batch = est.collect_naive(
            lambda k, r: q.sample(k, r), loglik_target.logdensity,
            spec.K_naive, spec.S, rng_n, dim=scn.dim,
        )
        naive_reports.append(est.empirical_report(batch))

        rng_l = substream(spec.seed, _FAM_RUN, 20 + scn_id, 2, run)
        r, _ = est.evaluate_lis(
            q_target, loglik_target, spec.iw_config(), spec.K_is, rng_l, init_from=q
        )
        lis = tg.lis_target(q_target, loglik_target)
        batch = est.collect_is(r, lis, spec.K_is, spec.S, rng_l.spawn(1)[0])
        lis_reports.append(est.empirical_report(batch))

    return [
        _table_row(scn.name, "approximate", "naive", spec.K_naive, spec,
                   naive_reports, None, None),
        _table_row(scn.name, "approximate", "lis", spec.K_is, spec,
                   lis_reports, None, None),
    ]


def run_table(scenario, spec: RunSpec, mode: str = "exact") -> list[dict]:
    """Estimator comparison rows for one scenario.

    Exponential-family scenarios support exact and approximate inference;
    linear regression is exact only; logistic regression is approximate
    only (its exact posterior is intractable).
    """
    if mode not in ("exact", "approximate"):
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(scenario, ExpFamScenario):
        return _run_expfam_table(scenario, spec, mode)
    if isinstance(scenario, LinRegScenario):
        if mode != "exact":
            raise ValueError("linear-regression tables run under exact inference")
        return _run_linreg_table(scenario, spec)
    if isinstance(scenario, LogRegScenario):
        if mode != "approximate":
            raise ValueError("the logistic posterior is intractable; use approximate mode")
        return _run_logreg_table(scenario, spec)
    raise TypeError(f"unknown scenario type {type(scenario)!r}")


def run_contour(
    model_name: str,
    mean_grid,
    size_grid,
    K: int = 1,
    train_mean: float = 10.0,
    train_size: int = 100,
) -> list[dict]:
    """Delta / SNR grid rows for the named model's default prior."""
    model = expfam_model(model_name)
    xi0 = expfam_prior(model_name)
    train = SufficientSummary(
        np.full(model.dim, train_mean * train_size), train_size, 0.0
    )
    cells = snr_mod.contour_grid(model, train, xi0, mean_grid, size_grid, K)
    return [
        {
            "test_mean": c.test_mean,
            "test_size": c.test_size,
            "delta": c.delta,
            "log10_snr": c.log10_snr,
        }
        for c in cells
    ]


def run_clt_check(dims, seed: int, n_train: int = 1000) -> list[dict]:
    """Exact vs large-data delta for matching train/test statistics.

    Forward-samples a d-dimensional Normal-mean dataset, sets the test set
    equal to the training set, and compares the exact conjugate delta with
    its dimension-scaled approximation.
    """
    rows = []
    for i, d in enumerate(dims):
        d = int(d)
        rng = substream(seed, _FAM_RUN, 30, i)
        model = NormalKnownVar(sigma2=1.0, dim=d)
        xi0 = NaturalParams(np.zeros(d), 1.0)
        center = rng.standard_normal(d)
        data = center + rng.standard_normal((n_train, d))
        summary = model.summarize(data)
        exact = snr_mod.delta_exact(model, xi0, summary, summary).delta
        approx = snr_mod.delta_clt(d, n_train, n_train)
        rows.append(
            {
                "d": d,
                "n_train": n_train,
                "delta_exact": exact,
                "delta_clt": approx,
                "rel_err": abs(exact - approx) / exact,
            }
        )
    return rows


def _percentile_row(scenario, estimator, K, errors, oracle):
    errs = np.asarray(errors, dtype=float)
    return {
        "scenario": scenario,
        "estimator": estimator,
        "K": K,
        "replicates": errs.shape[0],
        "median_err": float(np.median(errs)),
        "p05_err": float(np.percentile(errs, 5)),
        "p95_err": float(np.percentile(errs, 95)),
        "oracle_log_ppd": oracle,
    }


def run_linreg_error_curves(
    scenario_names,
    K_list,
    seed: int,
    replicates: int = 1000,
    train_config: TrainConfig | None = None,
) -> list[dict]:
    """Evaluation-error percentiles versus sample count, per scenario.

    Errors are oracle log predictive density minus the estimate.  The naive
    estimator samples the exact posterior; the proposal for learned IS is
    trained once per scenario and then evaluated independently.
    """
    K_list = sorted(int(k) for k in K_list)
    if any(k < 1 for k in K_list):
        raise ValueError("K values must be positive")
    if train_config is None:
        train_config = TrainConfig(iters=1000, learning_rate=1e-3, M=16, grad_batch=8)
    rows = []
    for name in scenario_names:
        scn = gen_linreg(name, seed)
        problem = scn.problem
        d = problem.dim
        post = lr.posterior(problem)
        oracle = lr.log_ppd_exact_linreg(problem, scn.Xstar, scn.ystar)
        scn_id = LINREG_SCENARIO_NAMES.index(name)

        # naive: whitened quadratic evaluation of the posterior-sample loglik
        program = lr.whitened_loglik_quadratic(post, scn.Xstar, scn.ystar, problem.sigma2)
        for K in K_list:
            rng = substream(seed, _FAM_RUN, 40 + scn_id, 0, K)
            batch = _quad_program_values(program, K, replicates, rng, d)
            rows.append(
                _percentile_row(name, "naive", K, oracle - batch.values, oracle)
            )

        # learned IS: one proposal, independent evaluations at each K
        q_target = tg.gaussian_target(post.mean, post.chol)
        loglik_target = tg.linreg_loglik_target(scn.Xstar, scn.ystar, problem.sigma2)
        lis = tg.lis_target(q_target, loglik_target)
        rng_l = substream(seed, _FAM_RUN, 40 + scn_id, 1)
        q_init = FullRankGaussian.from_mean_chol(post.mean, post.chol)
        init = est.select_proposal_init(lis, train_config.M, rng_l, extra=q_init)
        r = train(lis, init, "iwelbo", train_config, rng_l).dist
        is_program = lr.whitened_is_quadratic(
            r.mu, r.scale_tril(), post, scn.Xstar, scn.ystar, problem.sigma2
        )
        for K in K_list:
            rng = substream(seed, _FAM_RUN, 40 + scn_id, 2, K)
            batch = _quad_program_values(is_program, K, replicates, rng, d)
            rows.append(
                _percentile_row(name, "lis", K, oracle - batch.values, oracle)
            )
    return rows


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_rows(path: str, rows: list[dict], fmt: str = "csv") -> None:
    """Write result rows as CSV (UTF-8, LF, header) or JSON."""
    if not rows:
        raise ValueError("no rows to write")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = list(rows[0].keys())
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csv_cell(row[k]) for k in header])
    elif fmt == "json":
        def _jsonable(v):
            if isinstance(v, (float, np.floating)):
                v = float(v)
                return _csv_cell(v) if (math.isinf(v) or math.isnan(v)) else v
            if isinstance(v, (int, np.integer)):
                return int(v)
            return v

        payload = [{k: _jsonable(v) for k, v in row.items()} for row in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _parse_cell(text: str):
    if text == "":
        return None
    if text == "inf":
        return math.inf
    if text == "-inf":
        return -math.inf
    if text == "nan":
        return math.nan
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_rows(path: str, fmt: str = "csv") -> list[dict]:
    """Parse a file written by :func:`write_rows` back into rows."""
    if fmt == "csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            return [
                {k: _parse_cell(v) for k, v in zip(header, row)} for row in reader
            ]
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return [
            {k: (_parse_cell(v) if isinstance(v, str) else v) for k, v in row.items()}
            for row in payload
        ]
    raise ValueError(f"unknown format {fmt!r}")
