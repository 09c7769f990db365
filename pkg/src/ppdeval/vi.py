"""Black-box variational optimization with full-rank Gaussians.

The variational family is a Gaussian with unconstrained mean and a lower
triangular scale whose diagonal passes through softplus, so every parameter
lives on all of R.  Two objectives are supported:

* the plain reparameterized ELBO with analytic entropy, for fitting an
  approximate posterior, and
* the importance-weighted bound with doubly-reparameterized gradients, for
  fitting an importance-sampling proposal (the naive gradient of that bound
  has vanishing signal-to-noise in exactly the regimes we care about).

Optimization is plain Adam.  Initialization tries a Laplace fit (Newton
ascent with step halving) against a standard normal and keeps whichever
scores better on a sampled objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .targets import DiffTarget, _sigmoid

__all__ = [
    "FullRankGaussian",
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "TrainingError",
    "sample_reparam",
    "laplace_candidate",
    "laplace_init",
    "elbo_estimate",
    "elbo_gradient",
    "iw_elbo_from_eps",
    "iw_elbo_estimate",
    "dreg_from_eps",
    "dreg_gradient",
    "train",
]

_LOG_2PI = np.log(2.0 * np.pi)


class TrainingError(RuntimeError):
    """Parameters became non-finite during optimization."""


def softplus(x):
    return np.logaddexp(0.0, x)


def inv_softplus(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("softplus outputs are strictly positive")
    # two branches keep full precision for both tiny and large inputs
    small = y < 1.0
    out = np.empty_like(y)
    out[small] = np.log(np.expm1(y[small]))
    out[~small] = y[~small] + np.log1p(-np.exp(-y[~small]))
    return out


@dataclass(frozen=True)
class FullRankGaussian:
    """Mean plus lower-triangular scale with softplus-constrained diagonal.

    ``scale_raw`` is the unconstrained parameterization: strict lower
    triangle used as-is, diagonal mapped through softplus to the positive
    diagonal of the effective factor L.
    """

    mu: np.ndarray
    scale_raw: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        raw = np.tril(np.asarray(self.scale_raw, dtype=float))
        if raw.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError("scale_raw must be (d, d) matching the mean")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "scale_raw", raw)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def scale_tril(self) -> np.ndarray:
        L = np.tril(self.scale_raw, -1)
        return L + np.diag(softplus(np.diag(self.scale_raw)))

    @property
    def cov(self) -> np.ndarray:
        L = self.scale_tril()
        return L @ L.T

    @classmethod
    def from_mean_chol(cls, mu, chol) -> "FullRankGaussian":
        chol = np.asarray(chol, dtype=float)
        raw = np.tril(chol, -1) + np.diag(inv_softplus(np.diag(chol)))
        return cls(np.asarray(mu, dtype=float), raw)

    @classmethod
    def standard(cls, dim: int) -> "FullRankGaussian":
        return cls.from_mean_chol(np.zeros(dim), np.eye(dim))

    def logdensity(self, z):
        z = np.asarray(z, dtype=float)
        L = self.scale_tril()
        diff = np.atleast_2d(z) - self.mu
        w = solve_triangular(L, diff.T, lower=True)
        vals = (
            -0.5 * np.sum(w**2, axis=0)
            - np.sum(np.log(np.diag(L)))
            - 0.5 * self.dim * _LOG_2PI
        )
        return float(vals[0]) if z.ndim == 1 else vals

    def gradient(self, z):
        """Gradient of logdensity with respect to z."""
        z = np.asarray(z, dtype=float)
        L = self.scale_tril()
        diff = np.atleast_2d(z) - self.mu
        w = solve_triangular(L, diff.T, lower=True)
        g = -solve_triangular(L, w, lower=True, trans="T").T
        return g[0] if z.ndim == 1 else g

    def entropy(self) -> float:
        L = self.scale_tril()
        return float(np.sum(np.log(np.diag(L))) + 0.5 * self.dim * (1.0 + _LOG_2PI))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_reparam(self, rng.standard_normal((count, self.dim)))

    def as_target(self) -> DiffTarget:
        """View this density as a DiffTarget (shares the same code paths)."""
        L = self.scale_tril()
        prec = solve_triangular(
            L, solve_triangular(L, np.eye(self.dim), lower=True), lower=True, trans="T"
        )
        return DiffTarget(
            self.dim, self.logdensity, self.gradient, hessian=lambda u: -prec
        )


def sample_reparam(g: FullRankGaussian, eps) -> np.ndarray:
    """z = mu + L eps; the deterministic path all gradients flow through."""
    eps = np.asarray(eps, dtype=float)
    return g.mu + eps @ g.scale_tril().T


@dataclass(frozen=True)
class TrainConfig:
    """Optimization budget; every field must be positive."""

    iters: int = 1000
    learning_rate: float = 1e-3
    M: int = 16
    grad_batch: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be non-negative")
        if self.learning_rate <= 0 or self.M < 1 or self.grad_batch < 1:
            raise ValueError("learning_rate, M and grad_batch must be positive")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def adam_ascend(params, grads, state: AdamState, lr: float):
    """One maximizing Adam step, in place on the parameter arrays."""
    state.step += 1
    t = state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= _ADAM_BETA1
        m += (1.0 - _ADAM_BETA1) * g
        v *= _ADAM_BETA2
        v += (1.0 - _ADAM_BETA2) * g**2
        mhat = m / (1.0 - _ADAM_BETA1**t)
        vhat = v / (1.0 - _ADAM_BETA2**t)
        p += lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)


def _chain_scale_grad(gL: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Map a gradient w.r.t. L to a gradient w.r.t. scale_raw."""
    g = np.tril(gL).copy()
    di = np.diag_indices_from(g)
    g[di] = g[di] * _sigmoid(np.diag(raw))
    return g


def elbo_estimate(g: FullRankGaussian, target: DiffTarget, eps) -> float:
    """Reparameterized ELBO estimate from fixed standard-normal draws.

    Exposed separately so the same draws can be re-evaluated at perturbed
    parameters (common-random-number finite differences).
    """
    z = sample_reparam(g, np.atleast_2d(np.asarray(eps, dtype=float)))
    return float(np.mean(target.logdensity(z))) + g.entropy()


def elbo_gradient(g: FullRankGaussian, target: DiffTarget, batch: int, rng):
    """ELBO estimate and its gradient w.r.t. ``(mu, scale_raw)``."""
    if batch < 1:
        raise ValueError("batch must be a positive integer")
    d = g.dim
    L = g.scale_tril()
    eps = rng.standard_normal((batch, d))
    z = g.mu + eps @ L.T
    vals = target.logdensity(z)
    grads = target.gradient(z)
    elbo = float(np.mean(vals)) + g.entropy()
    gmu = grads.mean(axis=0)
    gL = grads.T @ eps / batch + np.diag(1.0 / np.diag(L))
    return elbo, (gmu, _chain_scale_grad(gL, g.scale_raw))


def _log_weights(r: FullRankGaussian, target: DiffTarget, eps: np.ndarray):
    z = sample_reparam(r, eps)
    return z, target.logdensity(z) - r.logdensity(z)


def iw_elbo_from_eps(r: FullRankGaussian, target: DiffTarget, eps) -> float:
    """M-sample importance-weighted bound from fixed draws."""
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    _, lw = _log_weights(r, target, eps)
    a = np.max(lw)
    return float(a + np.log(np.mean(np.exp(lw - a))))


def iw_elbo_estimate(r: FullRankGaussian, target: DiffTarget, M: int, rng) -> float:
    """One estimate of the M-sample importance-weighted bound.

    At M = 1 this is the plain ELBO integrand; in expectation it increases
    with M toward the log normalizer of ``target``.
    """
    if M < 1:
        raise ValueError("M must be a positive integer")
    return iw_elbo_from_eps(r, target, rng.standard_normal((M, r.dim)))


def dreg_from_eps(r: FullRankGaussian, target: DiffTarget, eps):
    """Doubly-reparameterized gradient (and bound value) from fixed draws.

    With normalized weights treated as constants, each sample contributes
    its squared weight times the path derivative of ``log target - log r``
    where the proposal parameters inside ``log r`` are frozen.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    L = r.scale_tril()
    z, lw = _log_weights(r, target, eps)
    a = np.max(lw)
    e = np.exp(lw - a)
    value = float(a + np.log(np.mean(e)))
    w = e / np.sum(e)
    # grad of log r w.r.t. z at z = mu + L eps is -L^-T eps
    r_grad = -solve_triangular(L, eps.T, lower=True, trans="T").T
    gz = target.gradient(z) - r_grad
    w2 = w**2
    gmu = w2 @ gz
    gL = (gz * w2[:, None]).T @ eps
    return value, (gmu, _chain_scale_grad(gL, r.scale_raw))


def dreg_gradient(r: FullRankGaussian, target: DiffTarget, M: int, rng):
    """Gradient of the M-sample importance-weighted bound w.r.t. proposal."""
    if M < 1:
        raise ValueError("M must be a positive integer")
    _, grad = dreg_from_eps(r, target, rng.standard_normal((M, r.dim)))
    return grad


def _fd_hessian(target: DiffTarget, u: np.ndarray, step: float = 1e-5) -> np.ndarray:
    d = u.shape[0]
    H = np.empty((d, d))
    for i in range(d):
        h = step * (1.0 + abs(u[i]))
        up, dn = u.copy(), u.copy()
        up[i] += h
        dn[i] -= h
        H[:, i] = (target.gradient(up) - target.gradient(dn)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _newton_mode(target: DiffTarget, max_iter: int = 100, tol: float = 1e-8):
    """Newton ascent from the origin with step halving; None on failure."""
    hess = target.hessian if target.hessian is not None else lambda u: _fd_hessian(target, u)
    u = np.zeros(target.dim)
    f = target.logdensity(u)
    if not np.isfinite(f):
        return None
    for _ in range(max_iter):
        grad = target.gradient(u)
        if not np.all(np.isfinite(grad)):
            return None
        if np.linalg.norm(grad) < tol:
            break
        H = hess(u)
        try:
            step_dir = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return None
        scale = 1.0
        for _ in range(60):
            u_try = u - scale * step_dir
            f_try = target.logdensity(u_try)
            if np.isfinite(f_try) and f_try > f:
                u, f = u_try, f_try
                break
            scale *= 0.5
        else:
            break
    return u


def laplace_candidate(target: DiffTarget) -> FullRankGaussian | None:
    """The raw Laplace fit at the target's mode, or None if it fails.

    Fails when the Newton mode search stalls or the negated Hessian at the
    mode is not positive definite.
    """
    mode = _newton_mode(target)
    if mode is None:
        return None
    hess = target.hessian if target.hessian is not None else lambda u: _fd_hessian(target, u)
    H = hess(mode)
    try:
        C = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        return None
    cov = solve_triangular(
        C, solve_triangular(C, np.eye(target.dim), lower=True), lower=True, trans="T"
    )
    try:
        return FullRankGaussian.from_mean_chol(
            mode, np.linalg.cholesky(0.5 * (cov + cov.T))
        )
    except np.linalg.LinAlgError:
        return None


def laplace_init(
    target: DiffTarget, rng: np.random.Generator, elbo_samples: int = 1000
) -> FullRankGaussian:
    """Gaussian initialization at the target's mode, with a safe fallback.

    Fits a Gaussian at the Newton mode with covariance from the negated
    Hessian; if the mode search or the factorization fails, or if a standard
    normal scores a higher sampled ELBO, the standard normal wins.
    """
    standard = FullRankGaussian.standard(target.dim)
    candidate = laplace_candidate(target)
    if candidate is None:
        return standard
    eps = rng.standard_normal((elbo_samples, target.dim))
    if elbo_estimate(candidate, target, eps) >= elbo_estimate(standard, target, eps):
        return candidate
    return standard


@dataclass
class TrainResult:
    dist: FullRankGaussian
    trace: np.ndarray


def train(
    target: DiffTarget,
    init: FullRankGaussian,
    objective: str,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Run Adam on the chosen objective and return the fitted Gaussian.

    ``objective`` is ``"elbo"`` (reparameterized gradient, analytic entropy)
    or ``"iwelbo"`` (M-sample bound, doubly-reparameterized gradient).  Each
    step averages ``config.grad_batch`` independent gradient estimates; the
    per-iteration objective values are returned as the trace.
    """
    if init.dim != target.dim:
        raise ValueError("init and target dimensions disagree")
    if objective not in ("elbo", "iwelbo"):
        raise ValueError(f"unknown objective {objective!r}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    params = [init.mu.copy(), init.scale_raw.copy()]
    state = AdamState.zeros_like(params)
    trace = np.empty(config.iters)
    for it in range(config.iters):
        current = FullRankGaussian(params[0], params[1])
        if objective == "elbo":
            value, (gmu, graw) = elbo_gradient(current, target, config.grad_batch, rng)
        else:
            vals = []
            gmu = np.zeros_like(params[0])
            graw = np.zeros_like(params[1])
            for _ in range(config.grad_batch):
                v, (gm, gr) = dreg_from_eps(
                    current, target, rng.standard_normal((config.M, target.dim))
                )
                vals.append(v)
                gmu += gm
                graw += gr
            gmu /= config.grad_batch
            graw /= config.grad_batch
            value = float(np.mean(vals))
        adam_ascend(params, (gmu, graw), state, config.learning_rate)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingError(f"non-finite parameters at iteration {it}")
        trace[it] = value
    return TrainResult(FullRankGaussian(params[0], params[1]), trace)
