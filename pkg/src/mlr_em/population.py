"""Population-level EM operators.

``update_all_snr`` evaluates the exact Bessel-convolution form of the EM map
at any finite SNR. ``update_noiseless`` and ``update_no_separation`` are its
SNR → ∞ and SNR → 0 limits. The angle recurrence and the cycloid
parameterisation describe the noiseless trajectory.

The convolutions are computed in the variable w = a·u, where u = ν'/‖θ̄‖ is
the natural integration variable and a the K-argument slope. In w the
Bessel argument is |w| and the tails decay like exp(−(1 − |b/a|)|w|).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from ._backend import kernels
from .model import EmRun, as_vector, sign, suboptimality
from .specfun import QuadratureError, QuadratureSpec

__all__ = [
    "KernelParams",
    "PopulationUpdate",
    "cycloid_point",
    "distance_to_optimum",
    "iterate_noiseless",
    "kernel_params",
    "mixing_error_population",
    "recurrence_tan",
    "update_all_snr",
    "update_no_separation",
    "update_noiseless",
]


@dataclass(frozen=True)
class PopulationUpdate:
    """Result of one population EM step.

    ``basis`` is (ê₁, ê₂, e⃗₁, e⃗₂) with ê₁ = θ*/‖θ*‖ and e⃗₁ = θ/‖θ‖; the two
    second vectors are None when θ ∥ θ*.
    """

    theta_next: np.ndarray
    tanh_nu_next: float
    basis: tuple = ()
    quad_error: tuple = ()


@dataclass(frozen=True)
class KernelParams:
    """Slopes of the K-argument (a) and of the cosh-argument (b) per unit u."""

    a: float
    b: float
    nu_star: float
    theta_bar_norm: float

    def __post_init__(self):
        if not self.a > abs(self.b):
            raise ValueError("need a > |b| for an integrable kernel")


def _plane_basis(theta, theta_star):
    th = theta / np.linalg.norm(theta)
    e1 = theta_star / np.linalg.norm(theta_star)
    c = float(th @ e1)
    perp = th - c * e1
    s = float(np.linalg.norm(perp))
    if s == 0.0:
        return th, e1, c, 0.0, None, None
    e2 = perp / s
    ev2 = e1 - c * th
    ev2 = ev2 / np.linalg.norm(ev2)
    return th, e1, c, s, e2, ev2


def kernel_params(theta, truth):
    """(a, b) for the all-SNR convolution at the current θ."""
    theta = as_vector(theta, "theta")
    sigma = truth.sigma
    tb = float(np.linalg.norm(theta)) / sigma
    ts = float(np.linalg.norm(truth.theta_star)) / sigma
    _, _, c, s, _, _ = _plane_basis(theta, truth.theta_star)
    big_d = 1.0 + (s * ts) ** 2
    return KernelParams(
        a=math.sqrt(1.0 + ts * ts) / big_d,
        b=min(1.0, max(-1.0, c)) * ts / big_d,
        nu_star=truth.pi_star.nu,
        theta_bar_norm=tb,
    )


def _integrals(r, c, nu, tau, quad):
    vals, errs, n, ok = kernels.population_integrals(
        float(r), float(c), float(nu), float(tau), float(quad.truncation_exponent),
        float(quad.abs_tol), float(quad.rel_tol), int(quad.max_subdivisions),
        specfun.k0_scale(),
    )
    if not ok or not np.all(np.isfinite(vals)):
        raise QuadratureError(
            f"population integrals did not converge after {n} panels", vals, errs, n
        )
    return vals, errs


def update_all_snr(theta, nu, truth, quad=QuadratureSpec()):
    """Population EM step (M(θ, ν), N(θ, ν)) at finite, positive σ."""
    theta = as_vector(theta, "theta")
    sigma = truth.sigma
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError("update_all_snr needs 0 < sigma < inf")
    if not math.isfinite(nu):
        raise ValueError("nu must be finite")
    tnorm = float(np.linalg.norm(theta))
    if tnorm == 0.0:
        raise ValueError("theta has zero norm")
    tb = tnorm / sigma
    ts = float(np.linalg.norm(truth.theta_star)) / sigma
    th, e1, c, s, e2, ev2 = _plane_basis(theta, truth.theta_star)
    rho = min(1.0, max(-1.0, c))
    big_d = 1.0 + (s * ts) ** 2
    big_s = 1.0 + ts * ts
    a = math.sqrt(big_s) / big_d
    r = rho * ts / math.sqrt(big_s)
    (j_n, j_a, j_b), errs = _integrals(r, tb / a, nu, truth.pi_star.tanh_nu, quad)
    i_n = j_n / a
    i_a = j_a / (a * a)
    i_b = j_b / (a * a)
    tanh_next = min(1.0, max(-1.0, i_n / (math.pi * math.sqrt(big_d))))
    pre = -(sigma / math.pi) * big_d ** -1.5
    m = i_a * th
    if e2 is not None:
        m = m + (ts * ts * s * i_a) * e2 + (ts * s * math.sqrt(big_s) * i_b) * ev2
    return PopulationUpdate(pre * m, tanh_next, (e1, e2, th, ev2), tuple(errs))


def update_no_separation(theta_bar_norm, direction, nu, quad=QuadratureSpec()):
    """SNR → 0 limit; ``theta_next`` is in units of σ (i.e. θ̄).

    The direction of θ is preserved and only its normalised length and the
    mixing weight change.
    """
    direction = as_vector(direction, "direction")
    dn = float(np.linalg.norm(direction))
    if dn == 0.0:
        raise ValueError("direction has zero norm")
    if theta_bar_norm < 0 or not math.isfinite(theta_bar_norm) or not math.isfinite(nu):
        raise ValueError("theta_bar_norm must be finite and nonnegative, nu finite")
    (j_n, j_a, _), errs = _integrals(0.0, theta_bar_norm, nu, 0.0, quad)
    length = -j_a / math.pi
    tanh_next = min(1.0, max(-1.0, j_n / math.pi))
    u = direction / dn
    return PopulationUpdate(length * u, tanh_next, (None, None, u, None), tuple(errs[:2]))


def update_noiseless(theta, truth):
    """Closed-form noiseless EM step.

    θ⁺/‖θ*‖ = (2/π)[sgn(ρ) φ ê₁ + cos φ θ̂] and tanh ν⁺ = sgn(ρ)(2/π) φ tanh ν*.
    """
    theta = as_vector(theta, "theta")
    ts = truth.theta_star
    if float(np.linalg.norm(theta)) == 0.0 or float(np.linalg.norm(ts)) == 0.0:
        raise ValueError("zero-norm input")
    th, e1, c, s, e2, ev2 = _plane_basis(theta, ts)
    sg = sign(c)
    varphi = math.atan2(abs(c), s)
    scale = float(np.linalg.norm(ts)) * 2.0 / math.pi
    theta_next = scale * (sg * varphi * e1 + s * th)
    tanh_next = sg * (2.0 / math.pi) * varphi * truth.pi_star.tanh_nu
    return PopulationUpdate(theta_next, tanh_next, (e1, e2, th, ev2))


def recurrence_tan(tan_varphi, varphi):
    """tan φ⁺ = tan φ + φ (tan² φ + 1)."""
    return tan_varphi + varphi * (tan_varphi * tan_varphi + 1.0)


def cycloid_point(phi, sign_rho0):
    """Point of the unit cycloid at parameter ϕ, in the (ê₁, ê₂⁰) basis.

    1 − sgn(ρ⁰) x = (ϕ − sin ϕ)/π and y = (1 − cos ϕ)/π.
    """
    if not 0.0 <= phi <= math.pi:
        raise ValueError("phi must lie in [0, pi]")
    x = sign(sign_rho0) * (1.0 - (phi - math.sin(phi)) / math.pi)
    y = (1.0 - math.cos(phi)) / math.pi
    return x, y


def distance_to_optimum(phi):
    """‖θ⁺ − sgn(ρ) θ*‖/‖θ*‖ after one noiseless step from cycloid parameter ϕ."""
    return math.hypot(phi - math.sin(phi), 1.0 - math.cos(phi)) / math.pi


def mixing_error_population(varphi_prev, pi_star):
    """‖π^t − π̄*‖₁ = |1 − (2/π) φ^{t−1}| · ‖½ − π*‖₁."""
    return abs(1.0 - 2.0 * varphi_prev / math.pi) * abs(pi_star.tanh_nu)


def iterate_noiseless(theta0, truth, t_max, eps, tanh_nu0=0.0):
    """Iterate ``update_noiseless`` until the next iterate is within ``eps``.

    The stopping distance uses the exact cycloid distance rather than a
    vector difference.
    """
    if t_max < 1 or not eps > 0:
        raise ValueError("t_max must be >= 1 and eps > 0")
    theta = as_vector(theta0, "theta0")
    thetas = [theta]
    tnus = [float(tanh_nu0)]
    reason = "max_iters"
    for _ in range(t_max):
        phi = suboptimality(theta, truth.theta_star).phi
        up = update_noiseless(theta, truth)
        theta = up.theta_next
        thetas.append(theta)
        tnus.append(up.tanh_nu_next)
        if distance_to_optimum(phi) < eps:
            reason = "rel_tol"
            break
    meta = {"mode": "population_noiseless", "t_max": t_max, "eps": eps}
    return EmRun.from_iterates(np.array(thetas), np.array(tnus), truth, reason, meta)

