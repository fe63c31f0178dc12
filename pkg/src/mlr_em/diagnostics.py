"""Analytic identities, Monte-Carlo oracles, trajectory residuals and
convergence-rate fits used to check the EM closed forms."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .datagen import trial_rng
from .model import as_vector, sign, suboptimality
from .population import cycloid_point

__all__ = [
    "CycloidResidual",
    "McEstimate",
    "abs_quadratic_expectation",
    "convergence_exponent",
    "cycloid_residual",
    "grothendieck_expectation",
    "mc_abs_quadratic",
    "mc_grothendieck",
    "mc_population_oracle",
    "pi_l1_error",
    "theta_relative_error",
]

DEFAULT_CHUNK = 1 << 19


@dataclass(frozen=True)
class McEstimate:
    """Sample mean and its standard error over ``n_draws`` draws.

    Draws are split into ``n_shards`` fixed-size shards, each with its own
    stream keyed by (seed, shard index), and recombined in shard order.
    """

    mean: np.ndarray | float
    std_error: np.ndarray | float
    n_draws: int
    seed: int
    n_shards: int = 1

    def within(self, value, k=4.0):
        """True where |value − mean| ≤ k·SE."""
        return np.abs(np.asarray(value) - self.mean) <= k * np.asarray(self.std_error)

    def z_score(self, value):
        se = np.asarray(self.std_error, dtype=float)
        diff = np.abs(np.asarray(value) - self.mean)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0))


def _run_shards(n_draws, seed, shard_fn, chunk, workers):
    """Evaluate ``shard_fn(rng, m)`` → (sum, sumsq) over shards; reduce in order."""
    if n_draws < 2:
        raise ValueError("need at least two draws")
    sizes = [chunk] * (n_draws // chunk)
    if n_draws % chunk:
        sizes.append(n_draws % chunk)

    def job(k):
        return shard_fn(trial_rng(seed, k), sizes[k])

    if workers and workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(k) for k in range(len(sizes))]
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    mean = s / n_draws
    var = np.maximum(ss / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)
    return mean, np.sqrt(var / n_draws), len(sizes)


def _estimate(values_fn, n_draws, seed, chunk, workers):
    def shard(rng, m):
        v = values_fn(rng, m)
        return v.sum(axis=0), (v * v).sum(axis=0)

    mean, se, k = _run_shards(n_draws, seed, shard, chunk, workers)
    if np.ndim(mean) == 0:
        mean, se = float(mean), float(se)
    return McEstimate(mean, se, n_draws, seed, k)


def grothendieck_expectation(theta, theta_star):
    """E sgn⟨x,θ*⟩ sgn⟨x,θ⟩ = sgn(ρ)(2/π) φ for x ~ N(0, I)."""
    a = suboptimality(theta, theta_star)
    return a.sign_rho * (2.0 / math.pi) * a.varphi


def abs_quadratic_expectation(theta, theta_star):
    """E|θ*ᵀ x xᵀ θ| = ‖θ*‖‖θ‖ (2/π)(φ sin φ + cos φ)."""
    a = suboptimality(theta, theta_star)
    norms = float(np.linalg.norm(theta)) * float(np.linalg.norm(theta_star))
    return norms * (2.0 / math.pi) * (a.varphi * math.sin(a.varphi) + math.cos(a.varphi))


def _pair(theta, theta_star):
    theta = as_vector(theta, "theta")
    theta_star = as_vector(theta_star, "theta_star")
    if theta.size != theta_star.size:
        raise ValueError("dimension mismatch")
    return np.stack([theta_star, theta], axis=1)


def mc_grothendieck(theta, theta_star, n_draws, seed, chunk=DEFAULT_CHUNK, workers=None):
    basis = _pair(theta, theta_star)

    def values(rng, m):
        p = rng.standard_normal((m, basis.shape[0])) @ basis
        return np.where(p[:, 0] >= 0, 1.0, -1.0) * np.where(p[:, 1] >= 0, 1.0, -1.0)

    return _estimate(values, n_draws, seed, chunk, workers)


def mc_abs_quadratic(theta, theta_star, n_draws, seed, chunk=DEFAULT_CHUNK, workers=None):
    basis = _pair(theta, theta_star)

    def values(rng, m):
        p = rng.standard_normal((m, basis.shape[0])) @ basis
        return np.abs(p[:, 0] * p[:, 1])

    return _estimate(values, n_draws, seed, chunk, workers)


def mc_population_oracle(theta, nu, truth, n_draws, seed, sigma=None, clamp=50.0,
                         chunk=DEFAULT_CHUNK, workers=None):
    """Monte-Carlo estimates of M = E tanh(y⟨x,θ⟩/σ² + ν) y x and N = E tanh(·).

    σ defaults to ``truth.sigma``; σ = 0 uses the sign limit
    M = E|y| sgn⟨x,θ⟩ x, N = E sgn(y) sgn⟨x,θ⟩.
    """
    theta = as_vector(theta, "theta")
    ts = truth.theta_star
    sigma = truth.sigma if sigma is None else float(sigma)
    p1 = truth.pi_star.p1
    d = theta.size

    def values(rng, m):
        x = rng.standard_normal((m, d))
        z = rng.random(m) < p1
        eps = rng.standard_normal(m)
        signal = x @ ts
        y = np.where(z, signal, -signal)
        proj = x @ theta
        if sigma > 0.0:
            y = y + sigma * eps
            w = np.tanh(np.clip(y * proj / (sigma * sigma) + nu, -clamp, clamp))
            mvals = (w * y)[:, None] * x
        else:
            s = np.where(proj >= 0, 1.0, -1.0)
            w = np.where(y >= 0, 1.0, -1.0) * s
            mvals = (np.abs(y) * s)[:, None] * x
        return np.concatenate([mvals, w[:, None]], axis=1)

    est = _estimate(values, n_draws, seed, chunk, workers)
    m_est = McEstimate(est.mean[:d], est.std_error[:d], n_draws, seed, est.n_shards)
    n_est = McEstimate(float(est.mean[d]), float(est.std_error[d]), n_draws, seed, est.n_shards)
    return m_est, n_est


class CycloidResidual(NamedTuple):
    in_plane: float
    out_of_plane: float


def cycloid_residual(run, theta0, theta_star):
    """Largest distance of iterates t ≥ 1 from the cycloid, plus the largest
    component outside span{θ⁰, θ*}.

    Coordinates are taken in the (ê₁, ê₂⁰) basis and scaled by 1/‖θ*‖; the
    cycloid parameter for iterate t is ϕ of iterate t−1.
    """
    th0 = as_vector(theta0, "theta0")
    ts = as_vector(theta_star, "theta_star")
    ts_norm = float(np.linalg.norm(ts))
    e1 = ts / ts_norm
    u0 = th0 / np.linalg.norm(th0)
    c0 = float(u0 @ e1)
    perp = u0 - c0 * e1
    pn = float(np.linalg.norm(perp))
    if pn <= 1e-14:
        raise ValueError("theta0 is parallel to theta_star; the plane is undefined")
    e2 = perp / pn
    s0 = sign(c0)
    worst_in = 0.0
    worst_out = 0.0
    for t in range(1, len(run.thetas)):
        v = run.thetas[t] / ts_norm
        x = float(v @ e1)
        y = float(v @ e2)
        cx, cy = cycloid_point(run.angles[t - 1].phi, s0)
        worst_in = max(worst_in, math.hypot(x - cx, y - cy))
        worst_out = max(worst_out, float(np.linalg.norm(v - x * e1 - y * e2)))
    return CycloidResidual(worst_in, worst_out)


def convergence_exponent(series):
    """OLS fit of log s_{t+1} on log s_t; returns (slope, intercept)."""
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or s.size < 3:
        raise ValueError("need at least three points")
    if not np.all(s > 0) or not np.all(np.isfinite(s)):
        raise ValueError("series must be strictly positive and finite")
    a = np.log(s[:-1])
    b = np.log(s[1:])
    design = np.stack([a, np.ones_like(a)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, b, rcond=None)
    return float(slope), float(intercept)


def theta_relative_error(theta, theta_star, sign_=1.0):
    """‖θ − sign·θ*‖/‖θ*‖."""
    ts = as_vector(theta_star, "theta_star")
    nrm = float(np.linalg.norm(ts))
    if nrm == 0.0:
        raise ValueError("theta_star has zero norm")
    return float(np.linalg.norm(as_vector(theta, "theta") - sign(sign_) * ts)) / nrm


def pi_l1_error(pi, pi_star, sign_rho0=1.0):
    """‖π − π̄*‖₁ = |tanh ν − sgn(ρ⁰) tanh ν*|."""
    return abs(pi.tanh_nu - sign(sign_rho0) * pi_star.tanh_nu)
