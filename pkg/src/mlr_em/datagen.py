"""Seeded synthetic data for the two-component mixed linear regression model.

Randomness comes from NumPy's counter-based Philox generator keyed by a
``SeedSequence``; Gaussians use NumPy's ziggurat sampler. Per-trial streams
are keyed by (master seed, trial index) so trials are independent and
reproducible in any execution order.
"""
import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, GroundTruth, as_vector

__all__ = [
    "GenSpec",
    "batch_stream",
    "derive_seed",
    "generate",
    "sample_initial_with_angle",
    "sample_unit_sphere",
    "trial_rng",
]


def trial_rng(seed, *keys):
    """Philox generator for the stream identified by (seed, *keys)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def derive_seed(seed, *keys):
    """A 64-bit seed for the sub-stream (seed, *keys)."""
    lo, hi = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class GenSpec:
    n: int
    d: int
    truth: GroundTruth
    seed: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.truth.theta_star.size != self.d:
            raise ValueError(
                f"theta_star has length {self.truth.theta_star.size}, expected d = {self.d}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def generate(spec):
    """Draw n samples: x ~ N(0, I), z ~ Cat(π*), y = ±⟨θ*, x⟩ + σ ε.

    With σ = 0 no noise term is added, so responses are exactly ±⟨θ*, x⟩.
    """
    rng = trial_rng(spec.seed)
    truth = spec.truth
    x = rng.standard_normal((spec.n, spec.d))
    z = np.where(rng.random(spec.n) < truth.pi_star.p1, 1, 2).astype(np.int8)
    eps = rng.standard_normal(spec.n)
    signal = x @ truth.theta_star
    y = np.where(z == 1, signal, -signal)
    if truth.sigma > 0.0:
        y = y + truth.sigma * eps
    return Dataset(x, y, z, int(spec.seed))


def batch_stream(spec, batch_size):
    """Endless fresh batches of ``batch_size`` samples from the model in ``spec``."""
    k = 0
    while True:
        yield generate(GenSpec(batch_size, spec.d, spec.truth, derive_seed(spec.seed, k)))
        k += 1


def sample_unit_sphere(d, seed):
    """Uniform draw from the unit sphere in R^d (Gaussian draw, normalised)."""
    if d < 1:
        raise ValueError("d must be positive")
    rng = trial_rng(seed)
    while True:
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
        if nrm > 0.0:
            return v / nrm


def sample_initial_with_angle(theta_star, varphi0, seed):
    """Unit θ⁰ with sub-optimality angle ``varphi0`` against θ*.

    θ⁰ = sin φ⁰ ê₁ + cos φ⁰ u, with u uniform on the unit sphere of the
    orthogonal complement of θ*.
    """
    ts = as_vector(theta_star, "theta_star")
    nrm = float(np.linalg.norm(ts))
    if nrm == 0.0:
        raise ValueError("theta_star has zero norm")
    if not 0.0 < varphi0 <= 0.5 * math.pi:
        raise ValueError("varphi0 must lie in (0, pi/2]")
    e1 = ts / nrm
    if varphi0 == 0.5 * math.pi:
        return e1.copy()
    if ts.size == 1:
        raise ValueError("d = 1 admits no orthogonal direction")
    rng = trial_rng(seed)
    while True:
        u = rng.standard_normal(ts.size)
        u -= (u @ e1) * e1
        un = np.linalg.norm(u)
        if un > 1e-8:
            break
    u /= un
    th = math.sin(varphi0) * e1 + math.cos(varphi0) * u
    return th / np.linalg.norm(th)
