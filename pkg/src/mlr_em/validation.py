"""Check suites run by ``mlr-em validate``.

Every check yields a ``Check(name, value, reference, tolerance, passed)``
row; a check passes when |value − reference| ≤ tolerance unless stated
otherwise in its name (``*_max``: value ≤ tolerance).
"""
import math
from typing import NamedTuple

import mpmath
import numpy as np

from . import specfun
from .datagen import derive_seed, sample_unit_sphere, trial_rng
from .diagnostics import (
    abs_quadratic_expectation,
    convergence_exponent,
    cycloid_residual,
    grothendieck_expectation,
    mc_abs_quadratic,
    mc_grothendieck,
    mc_population_oracle,
)
from .model import GroundTruth, MixingState, suboptimality
from .population import (
    iterate_noiseless,
    recurrence_tan,
    update_all_snr,
    update_no_separation,
    update_noiseless,
)

__all__ = [
    "Check",
    "GOLDEN_RATIO",
    "ORACLE_GRID",
    "diagnostics_suite",
    "population_suite",
    "random_pairs",
    "run_suites",
    "specfun_suite",
    "oracle_grid_case",
]

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
MC_BAND = 4.0

# (SNR, ρ, tanh ν*) grid for the all-SNR closed form against Monte Carlo
ORACLE_GRID = [(snr, rho, tn) for snr in (0.3, 1.0, 3.0) for rho in (0.2, 0.5, 0.9)
                for tn in (0.0, 0.4, 0.96)]
GRID_THETA_BAR_NORM = 1.5
GRID_NU = 0.1


class Check(NamedTuple):
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool


def _abs_check(name, value, reference, tol):
    value = float(value)
    return Check(name, value, float(reference), float(tol),
                 bool(math.isfinite(value) and abs(value - reference) <= tol))


def _max_check(name, value, tol):
    value = float(value)
    return Check(name, value, 0.0, float(tol), bool(math.isfinite(value) and value <= tol))


# -- special functions ---------------------------------------------------------

def _mp_k(order, x):
    with mpmath.workdps(40):
        return float(mpmath.besselk(order, x))


def specfun_suite(quad=specfun.QuadratureSpec()):
    out = []
    grid = np.logspace(-6, 2, 200)
    for order, fn in ((0, specfun.bessel_k0), (1, specfun.bessel_k1)):
        got = fn(grid)
        ref = np.array([_mp_k(order, x) for x in grid])
        out.append(_max_check(f"bessel_k{order}_rel_err_max", np.max(np.abs(got / ref - 1.0)), 1e-12))
    out.append(_abs_check("integral_k0_half_line", specfun.integrate(specfun.bessel_k0, 0, math.inf, quad),
                          math.pi / 2, 1e-10))
    out.append(_abs_check("integral_x_k0_half_line",
                          specfun.integrate(lambda x: x * specfun.bessel_k0(x), 0, math.inf, quad),
                          1.0, 1e-10))
    out.append(_abs_check("integral_abs_x_k0_line",
                          specfun.integrate(lambda x: np.abs(x) * specfun.bessel_k0(np.abs(x)),
                                            -math.inf, math.inf, quad, points=(0.0,)), 2.0, 1e-10))
    out.append(_abs_check("integral_gaussian",
                          specfun.integrate(lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi),
                                            -math.inf, math.inf, quad), 1.0, 1e-12))
    fine = np.logspace(-6, math.log10(700), 2000)
    k0v, k1v = specfun.bessel_k0(fine), specfun.bessel_k1(fine)
    mono = int(np.sum(np.diff(k0v) >= 0) + np.sum(np.diff(k1v) >= 0))
    out.append(_max_check("bessel_monotone_violations_max", mono, 0))
    out.append(_max_check("k1_equals_minus_k0_prime_max", derivative_mismatch(), 1e-8))
    out.append(_max_check("k0_small_x_law_ratio_max", small_x_law_ratio(), 1.0))
    small = np.logspace(-8, -2, 50)
    out.append(_max_check("k1_small_x_law_max", np.max(np.abs(small * specfun.bessel_k1(small) - 1.0)),
                          5e-3))
    return out


def derivative_mismatch(points=200):
    """max |K1(x) + K0'(x)| on [0.1, 50], K0' by a fourth-order central
    difference with step h = 1e-5·max(1, x)."""
    xs = np.linspace(0.1, 50, points)
    h = 1e-5 * np.maximum(1.0, xs)
    k0 = specfun.bessel_k0
    deriv = (-k0(xs + 2 * h) + 8 * k0(xs + h) - 8 * k0(xs - h) + k0(xs - 2 * h)) / (12 * h)
    return float(np.max(np.abs(specfun.bessel_k1(xs) + deriv)))


def small_x_law_ratio(points=50):
    """Small-x expansion of K0 through the x² term, as a ratio to its bound.

    Remainder |K0 + ln(x/2) + γ + (x²/4)(ln(x/2) + γ − 1)| against
    5e-3·x²·|ln x| plus the double-precision floor 8·eps·|ln x|; values ≤ 1 pass.
    """
    x = np.logspace(-8, -2, points)
    lg = np.log(x / 2) + np.euler_gamma
    rem = np.abs(specfun.bessel_k0(x) + lg + 0.25 * x * x * (lg - 1.0))
    bound = 5e-3 * x * x * np.abs(np.log(x)) + 8 * np.finfo(float).eps * np.abs(np.log(x))
    return float(np.max(rem / bound))


# -- population operators ------------------------------------------------------

def oracle_grid_case(snr, rho, tanh_nu_star, d=3):
    """(θ, ν, truth) for one grid point: σ = 1, θ* = snr·e₁, ‖θ̄‖ = 1.5, ν = 0.1."""
    ts = np.zeros(d)
    ts[0] = snr
    th = np.zeros(d)
    th[0] = rho
    th[1] = math.sqrt(1.0 - rho * rho)
    truth = GroundTruth(ts, MixingState(tanh_nu_star), 1.0)
    return GRID_THETA_BAR_NORM * th, GRID_NU, truth


def closed_form_oracle_checks(mc_draws, seed, quad=specfun.QuadratureSpec(), workers=None):
    """Closed form vs Monte Carlo on the 27-point grid; value is the largest |z|."""
    out = []
    for i, (snr, rho, tn) in enumerate(ORACLE_GRID):
        theta, nu, truth = oracle_grid_case(snr, rho, tn)
        up = update_all_snr(theta, nu, truth, quad)
        m_est, n_est = mc_population_oracle(theta, nu, truth, mc_draws, seed + i, workers=workers)
        z = max(float(np.max(m_est.z_score(up.theta_next))), float(n_est.z_score(up.tanh_nu_next)))
        out.append(_max_check(f"oracle_snr{snr}_rho{rho}_tanhnu{tn}_zmax", z, MC_BAND))
    return out


def random_pairs(count, dims, seed):
    """``count`` random (θ⁰, θ*) pairs cycling through ``dims``."""
    pairs = []
    for k in range(count):
        d = dims[k % len(dims)]
        rng = trial_rng(seed, k)
        ts = rng.standard_normal(d) * rng.uniform(0.5, 2.0)
        th = rng.standard_normal(d)
        pairs.append((th, ts))
    return pairs


def limit_configs(count, seed):
    out = []
    for k in range(count):
        rng = trial_rng(seed, 1000 + k)
        d = int(rng.integers(2, 6))
        ts = rng.standard_normal(d)
        ts /= np.linalg.norm(ts)
        th = rng.standard_normal(d)
        out.append((ts, th, float(rng.uniform(-0.95, 0.95)), float(rng.uniform(-1.0, 1.0)),
                    float(rng.uniform(0.2, 3.0))))
    return out


def limit_errors(ts, th, tn, nu, tb, quad=specfun.QuadratureSpec()):
    """Gaps of the all-SNR map to its limits at SNR 1e4 and 1e-4.

    θ is compared in relative ℓ₂; tanh ν, already on a unit scale, in
    absolute value.
    """
    hi = GroundTruth(ts, MixingState(tn), float(np.linalg.norm(ts)) / 1e4)
    a = update_all_snr(th, nu, hi, quad)
    b = update_noiseless(th, hi)
    lo = GroundTruth(ts * 1e-4 / np.linalg.norm(ts), MixingState(tn), 1.0)
    th_lo = th / np.linalg.norm(th) * tb
    a2 = update_all_snr(th_lo, nu, lo, quad)
    b2 = update_no_separation(tb, th_lo, nu, quad)

    def gap(u, v):
        rel = float(np.linalg.norm(u.theta_next - v.theta_next) / np.linalg.norm(v.theta_next))
        return max(rel, abs(u.tanh_nu_next - v.tanh_nu_next))

    return gap(a, b), gap(a2, b2)


def cycloid_and_recurrence(pairs, t_max=50, eps=1e-14):
    """Largest cycloid residual, out-of-plane norm and recurrence mismatch."""
    worst_in = worst_out = worst_rec = 0.0
    for th0, ts in pairs:
        truth = GroundTruth(ts, MixingState(0.4), 0.0)
        run = iterate_noiseless(th0, truth, t_max, eps)
        res = cycloid_residual(run, th0, ts)
        worst_in = max(worst_in, res.in_plane)
        worst_out = max(worst_out, res.out_of_plane)
        a = suboptimality(th0, ts)
        nxt = suboptimality(update_noiseless(th0, truth).theta_next, ts)
        rec = recurrence_tan(a.tan_varphi, a.varphi)
        worst_rec = max(worst_rec, abs(nxt.tan_varphi - rec) / max(1.0, abs(rec)))
    return worst_in, worst_out, worst_rec


def growth_violations(points=1000):
    """Violations of the golden-ratio growth and of the squaring inequality."""
    varphi = np.linspace(0.0, math.pi / 2, points + 2)[1:-1]
    a = np.tan(varphi)
    nxt = recurrence_tan(a, varphi)
    golden = int(np.sum(nxt < GOLDEN_RATIO * a))
    big = a >= 1.5
    lhs = (math.pi / 2) * (nxt[big] - math.pi / 4)
    rhs = ((math.pi / 2) * (a[big] - math.pi / 4)) ** 2
    squaring = int(np.sum(lhs < rhs))
    # grid over tan φ ≥ 1.5 itself, so the squaring law is exercised densely
    tb = np.linspace(1.5, 1e3, points)
    nb = recurrence_tan(tb, np.arctan(tb))
    squaring += int(np.sum((math.pi / 2) * (nb - math.pi / 4) < ((math.pi / 2) * (tb - math.pi / 4)) ** 2))
    return golden, squaring


def population_suite(mc_draws, seed, quad=specfun.QuadratureSpec(), workers=None):
    out = closed_form_oracle_checks(mc_draws, seed, quad, workers)
    errs = [limit_errors(*cfg, quad=quad) for cfg in limit_configs(10, seed)]
    out.append(_max_check("limit_high_snr_vs_noiseless_max", max(e[0] for e in errs), 5e-3))
    out.append(_max_check("limit_low_snr_vs_no_separation_max", max(e[1] for e in errs), 5e-3))
    pairs = random_pairs(200, (2, 3, 50), seed)
    w_in, w_out, w_rec = cycloid_and_recurrence(pairs)
    out.append(_max_check("cycloid_residual_max", w_in, 1e-10))
    out.append(_max_check("cycloid_out_of_plane_max", w_out, 1e-10))
    out.append(_max_check("recurrence_mismatch_max", w_rec, 1e-10))
    golden, squaring = growth_violations()
    out.append(_max_check("growth_golden_ratio_violations_max", golden, 0))
    out.append(_max_check("growth_squaring_violations_max", squaring, 0))
    # no-separation: bounded length, shrinking |tanh ν| with unchanged sign
    worst_len = 0.0
    mono = 0
    for tb in (0.1, 0.5, 1.0, 3.0, 10.0):
        for nu in (-1.0, -0.2, 0.2, 0.5, 1.5):
            up = update_no_separation(tb, np.array([1.0, 0.0]), nu, quad)
            worst_len = max(worst_len, float(np.linalg.norm(up.theta_next)))
            if abs(up.tanh_nu_next) > abs(math.tanh(nu)) or up.tanh_nu_next * nu < 0:
                mono += 1
    out.append(_max_check("no_separation_length_max", worst_len, 2.0 / math.pi))
    out.append(_max_check("no_separation_mixing_violations_max", mono, 0))
    # span invariance
    span = 0.0
    for th0, ts in pairs[:30]:
        truth = GroundTruth(ts, MixingState(0.4), float(np.linalg.norm(ts)))
        for up in (update_all_snr(th0, 0.2, truth, quad), update_noiseless(th0, truth)):
            basis, _ = np.linalg.qr(np.stack([ts, th0], axis=1))
            v = up.theta_next
            span = max(span, float(np.linalg.norm(v - basis @ (basis.T @ v)) / np.linalg.norm(v)))
    out.append(_max_check("span_residual_max", span, 1e-10))
    return out


# -- identities and estimators -------------------------------------------------

def identity_checks(mc_draws, seed, count=20, workers=None):
    """Grothendieck and |quadratic| identities vs Monte Carlo; values are |z|."""
    worst_g = worst_q = 0.0
    for k in range(count):
        rng = trial_rng(seed, 5000 + k)
        d = int(rng.integers(2, 8))
        ts = sample_unit_sphere(d, rng) * rng.uniform(0.5, 2.0)
        th = rng.standard_normal(d)
        g = mc_grothendieck(th, ts, mc_draws, derive_seed(seed, k, 0), workers=workers)
        q = mc_abs_quadratic(th, ts, mc_draws, derive_seed(seed, k, 1), workers=workers)
        worst_g = max(worst_g, float(g.z_score(grothendieck_expectation(th, ts))))
        worst_q = max(worst_q, float(q.z_score(abs_quadratic_expectation(th, ts))))
    return worst_g, worst_q


def diagnostics_suite(mc_draws, seed, workers=None):
    draws = min(mc_draws, 1_000_000)
    g, q = identity_checks(draws, seed, workers=workers)
    out = [_max_check("grothendieck_zmax", g, MC_BAND), _max_check("abs_quadratic_zmax", q, MC_BAND)]
    s = [2.0]
    for _ in range(5):
        s.append(s[-1] ** 2)
    out.append(_abs_check("exponent_exact_squaring", convergence_exponent(s)[0], 2.0, 1e-12))
    out.append(_abs_check("exponent_geometric",
                          convergence_exponent([3.0 * 0.5 ** t for t in range(6)])[0], 1.0, 1e-12))
    return out


def run_suites(suites, mc_draws, seed, quad=specfun.QuadratureSpec(), workers=None):
    rows = []
    for name in suites:
        if name == "specfun":
            rows += [c._replace(name=f"specfun.{c.name}") for c in specfun_suite(quad)]
        elif name == "population":
            rows += [c._replace(name=f"population.{c.name}")
                     for c in population_suite(mc_draws, seed, quad, workers)]
        elif name == "diagnostics":
            rows += [c._replace(name=f"diagnostics.{c.name}")
                     for c in diagnostics_suite(mc_draws, seed, workers)]
        else:
            raise ValueError(f"unknown suite {name!r}")
    return rows
