"""Finite-sample EM for two-component mixed linear regression.

Standard EM solves against the empirical Gram matrix (1/n)Σ x xᵀ, which is
Cholesky-factored once per dataset. Easy EM skips the solve. The
``*_noiseless`` variants are the σ → 0 limits, written with signs.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .datagen import batch_stream
from .model import EmRun, MixingState, as_vector, suboptimality, write_emrun

__all__ = [
    "EmConfig",
    "GramFactor",
    "InitResult",
    "RankDeficientError",
    "default_t_easy",
    "easy_em_init",
    "easy_em_step",
    "easy_em_step_noiseless",
    "em_step",
    "em_step_noiseless",
    "gram_factor",
    "run_pipeline",
    "write_emrun",
]

SIGMA_MODES = ("finite_sigma", "exact_noiseless")


class RankDeficientError(LinAlgError):
    """The empirical Gram matrix is not positive definite."""


def default_t_easy(n, delta=0.05):
    """⌈log₂(n / max(1, ln(1/δ)))⌉, at least 0."""
    return max(0, math.ceil(math.log2(n / max(1.0, math.log(1.0 / delta)))))


@dataclass(frozen=True)
class EmConfig:
    """Schedule: ``t_easy`` easy-EM steps then ``t_standard`` standard steps.

    ``t_easy=None`` uses ``default_t_easy(n)``.
    """

    t_easy: int | None = None
    t_standard: int = 20
    sigma_mode: str = "finite_sigma"
    rel_tol: float = 1e-12
    clamp: float = 50.0

    def __post_init__(self):
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")
        if self.t_standard < 0 or (self.t_easy is not None and self.t_easy < 0):
            raise ValueError("iteration counts must be nonnegative")
        if self.t_easy is not None and self.t_easy + self.t_standard < 1:
            raise ValueError("need at least one iteration")
        if not (self.rel_tol > 0 and self.clamp > 0):
            raise ValueError("rel_tol and clamp must be positive")

    def resolved_t_easy(self, n):
        return default_t_easy(n) if self.t_easy is None else self.t_easy


class GramFactor(NamedTuple):
    factor: tuple
    n: int
    d: int

    def solve(self, b):
        return cho_solve(self.factor, b, check_finite=False)


def gram_factor(dataset):
    """Cholesky factor of (1/n)Σ x_i x_iᵀ."""
    n, d = dataset.x.shape
    if n < d:
        raise RankDeficientError(f"Gram matrix has rank <= n = {n} < d = {d}")
    g = dataset.x.T @ dataset.x / n
    try:
        c = cho_factor(g, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise RankDeficientError("Gram matrix is not positive definite") from exc
    return GramFactor(c, n, d)


def _responsibility_weights(dataset, theta, nu, sigma, clamp):
    if not sigma > 0:
        raise ValueError("sigma must be positive; use the noiseless steps for sigma = 0")
    theta = as_vector(theta, "theta")
    arg = dataset.y * (dataset.x @ theta) / (sigma * sigma) + nu
    return np.tanh(np.clip(arg, -clamp, clamp))


def _checked(theta_next, tanh_next):
    if not (np.all(np.isfinite(theta_next)) and math.isfinite(tanh_next)):
        raise FloatingPointError("non-finite EM update")
    return theta_next, tanh_next


def easy_em_step(dataset, theta, nu, sigma, clamp=50.0):
    """(1/n)Σ tanh(y⟨x,θ⟩/σ² + ν) y x and the mean of the tanh weights."""
    w = _responsibility_weights(dataset, theta, nu, sigma, clamp)
    m = (w * dataset.y) @ dataset.x / dataset.n
    return _checked(m, float(w.mean()))


def em_step(dataset, theta, nu, sigma, clamp=50.0, gram=None):
    """Easy-EM moment followed by the Gram solve."""
    gram = gram_factor(dataset) if gram is None else gram
    m, tn = easy_em_step(dataset, theta, nu, sigma, clamp)
    return _checked(gram.solve(m), tn)


def _sgn(v):
    return np.where(v >= 0, 1.0, -1.0)


def easy_em_step_noiseless(dataset, theta):
    """(1/n)Σ |y| sgn⟨x,θ⟩ x and (1/n)Σ sgn(y) sgn⟨x,θ⟩, with sgn(0) = +1."""
    theta = as_vector(theta, "theta")
    s = _sgn(dataset.x @ theta)
    m = (np.abs(dataset.y) * s) @ dataset.x / dataset.n
    tn = float(np.mean(_sgn(dataset.y) * s))
    return _checked(m, tn)


def em_step_noiseless(dataset, theta, gram=None):
    gram = gram_factor(dataset) if gram is None else gram
    m, tn = easy_em_step_noiseless(dataset, theta)
    return _checked(gram.solve(m), tn)


def _step(kind, dataset, theta, tanh_nu, config, sigma, gram):
    if config.sigma_mode == "exact_noiseless":
        if kind == "easy":
            return easy_em_step_noiseless(dataset, theta)
        return em_step_noiseless(dataset, theta, gram)
    nu = MixingState(tanh_nu).nu
    if kind == "easy":
        return easy_em_step(dataset, theta, nu, sigma, config.clamp)
    return em_step(dataset, theta, nu, sigma, config.clamp, gram)


def run_pipeline(dataset, theta0, pi0, config, truth=None, sigma=None, gram=None):
    """Easy-EM phase followed by standard EM on the same dataset.

    ``truth`` (a GroundTruth) is needed for the recorded diagnostics; σ
    defaults to ``truth.sigma``. When the relative change of θ falls below
    ``config.rel_tol`` the easy phase ends early and the standard phase
    ends the run.
    """
    theta = as_vector(theta0, "theta0")
    if theta.size != dataset.d:
        raise ValueError("theta0 has the wrong dimension")
    if sigma is None and truth is not None:
        sigma = truth.sigma
    if config.sigma_mode == "finite_sigma" and not (sigma is not None and sigma > 0):
        raise ValueError("finite_sigma mode needs sigma > 0")
    t_easy = config.resolved_t_easy(dataset.n)
    schedule = ["easy"] * t_easy + ["standard"] * config.t_standard
    if not schedule:
        raise ValueError("empty schedule")
    if config.t_standard > 0 and gram is None:
        gram = gram_factor(dataset)
    thetas = [theta]
    tnus = [float(pi0.tanh_nu)]
    reason = "max_iters"
    phase_done = False
    for kind in schedule:
        if phase_done and kind == "easy":
            continue
        th_next, tn_next = _step(kind, dataset, thetas[-1], tnus[-1], config, sigma, gram)
        tn_next = min(1.0, max(-1.0, tn_next))
        nrm = float(np.linalg.norm(th_next))
        thetas.append(th_next)
        tnus.append(tn_next)
        if nrm == 0.0:
            reason = "degenerate"
            break
        change = float(np.linalg.norm(th_next - thetas[-2])) / float(np.linalg.norm(thetas[-2]))
        if change < config.rel_tol:
            # a converged easy phase hands over to the standard phase
            if kind == "easy" and config.t_standard > 0:
                phase_done = True
                continue
            reason = "rel_tol"
            break
    meta = {
        "n": dataset.n,
        "d": dataset.d,
        "seed": dataset.seed,
        "t_easy": t_easy,
        "t_standard": config.t_standard,
        "sigma_mode": config.sigma_mode,
        "sigma": sigma,
    }
    return EmRun.from_iterates(np.array(thetas), np.array(tnus), truth, reason, meta)


class InitResult(NamedTuple):
    theta: np.ndarray
    pi: MixingState
    reached: bool
    iterations: int


def easy_em_init(sample_source, batch_size, t0_max, theta0, pi0, clamp=50.0):
    """Sample-splitting easy EM: one fresh batch of ``batch_size`` per step.

    Stops at the first iterate whose angle φ exceeds 1/√batch_size
    (measured against ``sample_source.truth``); otherwise returns the last
    iterate with ``reached=False``.
    """
    if batch_size < 1 or t0_max < 0:
        raise ValueError("batch_size must be >= 1 and t0_max >= 0")
    truth = sample_source.truth
    threshold = 1.0 / math.sqrt(batch_size)
    theta = as_vector(theta0, "theta0")
    tn = float(pi0.tanh_nu)
    if suboptimality(theta, truth.theta_star).varphi > threshold:
        return InitResult(theta, MixingState(tn), True, 0)
    stream = batch_stream(sample_source, batch_size)
    for k in range(1, t0_max + 1):
        batch = next(stream)
        if truth.sigma == 0.0:
            theta, tn = easy_em_step_noiseless(batch, theta)
        else:
            theta, tn = easy_em_step(batch, theta, MixingState(tn).nu, truth.sigma, clamp)
        tn = min(1.0, max(-1.0, tn))
        if float(np.linalg.norm(theta)) == 0.0:
            return InitResult(theta, MixingState(tn), False, k)
        if suboptimality(theta, truth.theta_star).varphi > threshold:
            return InitResult(theta, MixingState(tn), True, k)
    return InitResult(theta, MixingState(tn), False, t0_max)
