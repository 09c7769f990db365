"""Signal-to-noise analysis and learned-IS evaluation of predictive densities."""

from .conjugate import (
    BinomialProb,
    ConjugateModel,
    DomainError,
    ExponentialRate,
    NaturalParams,
    NormalKnownVar,
    SufficientSummary,
    posterior_params,
)
from .estimators import (
    EstimatorReport,
    LogEstimateBatch,
    empirical_report,
    evaluate_lis,
    is_log_rk,
    naive_log_rk,
)
from .linreg import (
    GaussianDist,
    LinRegProblem,
    delta_exact_linreg,
    delta_limit_thm3,
    log_evidence,
    log_ppd_exact_linreg,
    make_mismatch_copies,
    posterior,
)
from .rng import substream
from .snr import (
    DeltaBreakdown,
    contour_grid,
    delta_approx,
    delta_clt,
    delta_exact,
    delta_gaussians,
    log10_snr_from_delta,
    snr_from_delta,
)
from .targets import (
    DiffTarget,
    conjugate_joint_target,
    conjugate_loglik_target,
    conjugate_posterior_target,
    gaussian_target,
    linreg_loglik_target,
    lis_target,
    logreg_joint_target,
    logreg_loglik_target,
)
from .vi import (
    FullRankGaussian,
    TrainConfig,
    dreg_gradient,
    elbo_gradient,
    iw_elbo_estimate,
    laplace_init,
    sample_reparam,
    train,
)

__version__ = "0.1.0"
