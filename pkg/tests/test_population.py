import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlr_em import specfun
from mlr_em.diagnostics import mc_population_oracle
from mlr_em.model import GroundTruth, MixingState, mixing_from_probability, suboptimality
from mlr_em.population import (
    KernelParams,
    cycloid_point,
    distance_to_optimum,
    iterate_noiseless,
    kernel_params,
    mixing_error_population,
    recurrence_tan,
    update_all_snr,
    update_no_separation,
    update_noiseless,
)
from mlr_em.specfun import QuadratureError, QuadratureSpec

R2 = math.sqrt(0.5)


def gh_oracle(theta, nu, truth, m=200):
    """Tensor Gauss-Hermite evaluation of E tanh(yxᵀθ/σ² + ν)·(y x, 1) in the
    (θ*, θ) plane, independent of the Bessel-kernel reduction."""
    t, w = np.polynomial.hermite_e.hermegauss(m)
    w = w / math.sqrt(2 * math.pi)
    ts = truth.theta_star
    e1 = ts / np.linalg.norm(ts)
    perp = theta - (theta @ e1) * e1
    e2 = perp / np.linalg.norm(perp)
    a, b = theta @ e1, theta @ e2
    g1, g2, eps = np.meshgrid(t, t, t, indexing="ij")
    weight = w[:, None, None] * w[None, :, None] * w[None, None, :]
    s, tn = truth.sigma, np.linalg.norm(ts)
    m_vec = np.zeros(2)
    n_val = 0.0
    for sg, p in ((1, truth.pi_star.p1), (-1, truth.pi_star.p2)):
        y = sg * tn * g1 + s * eps
        h = np.tanh(y * (a * g1 + b * g2) / s**2 + nu)
        n_val += p * np.sum(weight * h)
        m_vec += p * np.array([np.sum(weight * h * y * g1), np.sum(weight * h * y * g2)])
    return m_vec[0] * e1 + m_vec[1] * e2, n_val


def _truth(snr, tanh_star=0.4, d=3, sigma=1.0):
    ts = np.zeros(d)
    ts[0] = snr * sigma
    return GroundTruth(ts, MixingState(tanh_star), sigma)


def _theta(rho, norm, d=3):
    th = np.zeros(d)
    th[0], th[1] = rho, math.sqrt(1 - rho * rho)
    return norm * th


@pytest.mark.parametrize("snr,rho,tanh_star", [(0.3, 0.2, 0.0), (1.0, 0.5, 0.4), (3.0, 0.9, 0.96),
                                               (3.0, -0.5, 0.4)])
def test_all_snr_matches_gauss_hermite(snr, rho, tanh_star):
    truth = _truth(snr, tanh_star)
    th = _theta(rho, 1.5)
    up = update_all_snr(th, 0.1, truth)
    m_ref, n_ref = gh_oracle(th, 0.1, truth)
    assert np.max(np.abs(up.theta_next - m_ref)) <= 5e-6
    assert abs(up.tanh_nu_next - n_ref) <= 5e-6


def test_all_snr_matches_monte_carlo():
    truth = _truth(3.0)
    th = _theta(0.5, 2.0)
    up = update_all_snr(th, 0.1, truth)
    m_est, n_est = mc_population_oracle(th, 0.1, truth, 10_000_000, seed=31)
    assert np.all(m_est.within(up.theta_next, 4))
    assert n_est.within(up.tanh_nu_next, 4)


def test_all_snr_scales_with_sigma():
    up1 = update_all_snr(_theta(0.5, 1.5), 0.1, _truth(2.0))
    up2 = update_all_snr(_theta(0.5, 3.0), 0.1, _truth(2.0, sigma=2.0))
    assert np.allclose(up2.theta_next, 2 * up1.theta_next, rtol=1e-10, atol=1e-13)
    assert up2.tanh_nu_next == pytest.approx(up1.tanh_nu_next, abs=1e-12)


def test_all_snr_collinear():
    for rho in (1.0, -1.0):
        up = update_all_snr(_theta(rho, 1.2), 0.3, _truth(2.0))
        assert np.all(np.abs(up.theta_next[1:]) <= 1e-10 * np.linalg.norm(up.theta_next))
        assert up.basis[1] is None


def test_all_snr_high_snr_mixing_weight():
    up = update_all_snr(_theta(R2, 1.0e4), 0.0, _truth(1e4))
    assert up.tanh_nu_next == pytest.approx(0.2, abs=2e-3)


def test_all_snr_preconditions():
    with pytest.raises(ValueError):
        update_all_snr(_theta(0.5, 1.0), 0.0, _truth(1.0, sigma=0.0) if False else
                       GroundTruth(np.ones(3), MixingState(0.0), 0.0))
    with pytest.raises(ValueError):
        update_all_snr(_theta(0.5, 1.0), math.inf, _truth(1.0))
    with pytest.raises(ValueError):
        update_all_snr(np.zeros(3), 0.0, _truth(1.0))


def test_all_snr_reports_quadrature_failure():
    with pytest.raises(QuadratureError):
        update_all_snr(_theta(0.5, 1.5), 0.1, _truth(3.0),
                       QuadratureSpec(abs_tol=1e-16, rel_tol=1e-16, max_subdivisions=3))


def test_kernel_params():
    kp = kernel_params(_theta(0.5, 1.5), _truth(3.0))
    assert kp.a > abs(kp.b)
    assert kp.theta_bar_norm == pytest.approx(1.5)
    assert kp.nu_star == pytest.approx(math.atanh(0.4))
    with pytest.raises(ValueError):
        KernelParams(1.0, 1.0, 0.0, 1.0)


def test_no_separation_zero_input():
    up = update_no_separation(0.0, np.array([1.0, 0.0]), 0.0)
    assert np.allclose(up.theta_next, 0.0, atol=1e-14)
    assert up.tanh_nu_next == pytest.approx(0.0, abs=1e-14)


def test_no_separation_golden():
    # E tanh(‖θ̄‖ g h + ν) and E tanh(·) g h for independent standard g, h
    t, w = np.polynomial.hermite_e.hermegauss(200)
    w = w / math.sqrt(2 * math.pi)
    g, h = np.meshgrid(t, t, indexing="ij")
    ww = w[:, None] * w[None, :]
    val = np.tanh(1.0 * g * h + 0.5)
    up = update_no_separation(1.0, np.array([0.0, 2.0]), 0.5)
    assert up.tanh_nu_next == pytest.approx(np.sum(ww * val), abs=1e-6)
    assert up.theta_next[1] == pytest.approx(np.sum(ww * val * g * h), abs=1e-6)
    assert up.theta_next[0] == 0.0
    assert 0 < up.tanh_nu_next <= math.tanh(0.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=-3.0, max_value=3.0))
def test_no_separation_bounds(norm, nu):
    up = update_no_separation(norm, np.array([1.0, 1.0]), nu)
    assert np.linalg.norm(up.theta_next) <= 2 / math.pi + 1e-12
    assert abs(up.tanh_nu_next) <= abs(math.tanh(nu)) + 1e-12
    if abs(nu) > 1e-9 and abs(up.tanh_nu_next) > 1e-12:
        assert math.copysign(1, up.tanh_nu_next) == math.copysign(1, nu)


def test_noiseless_fixed_point():
    truth = GroundTruth(np.array([0.0, 3.0, 4.0]), mixing_from_probability(0.7), 0.0)
    up = update_noiseless(truth.theta_star, truth)
    assert np.allclose(up.theta_next, truth.theta_star, rtol=0, atol=1e-14)
    assert up.tanh_nu_next == pytest.approx(0.4, abs=1e-15)


def test_noiseless_saddle_direction():
    truth = GroundTruth(np.array([2.0, 0.0]), mixing_from_probability(0.7), 0.0)
    up = update_noiseless(np.array([0.0, 5.0]), truth)
    assert np.allclose(up.theta_next / 2.0, [0.0, 2 / math.pi], atol=1e-15)
    assert up.tanh_nu_next == 0.0


def test_noiseless_diagonal():
    truth = GroundTruth(np.array([1.0, 0.0]), mixing_from_probability(0.7), 0.0)
    up = update_noiseless(np.array([1.0, 1.0]), truth)
    assert up.tanh_nu_next == pytest.approx(0.2, abs=1e-15)
    p = math.pi / 4
    expected = (2 / math.pi) * math.sqrt(p * p + math.cos(p) ** 2 + 2 * p * math.cos(p) * math.sin(p))
    assert np.linalg.norm(up.theta_next) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.8780389, abs=1e-7)


def test_noiseless_is_high_snr_limit():
    truth = _truth(1e4)
    th = _theta(0.6, 1e4)
    a = update_all_snr(th, 0.0, truth)
    b = update_noiseless(th, GroundTruth(truth.theta_star, truth.pi_star, 0.0))
    assert np.linalg.norm(a.theta_next - b.theta_next) <= 5e-3 * np.linalg.norm(b.theta_next)


def test_recurrence_examples():
    assert recurrence_tan(0.0, 0.0) == 0.0
    assert recurrence_tan(1.0, math.pi / 4) == pytest.approx(1 + math.pi / 2, abs=1e-15)
    out = recurrence_tan(1.5, math.atan(1.5))
    assert out == pytest.approx(1.5 + math.atan(1.5) * 3.25, abs=1e-15)
    assert (math.pi / 2) * (out - math.pi / 4) >= ((math.pi / 2) * (1.5 - math.pi / 4)) ** 2


@settings(max_examples=200)
@given(st.floats(min_value=0.0, max_value=1.5))
def test_recurrence_matches_vector_update(varphi):
    truth = GroundTruth(np.array([1.0, 0.0]), MixingState(0.0), 0.0)
    th = np.array([math.sin(varphi), math.cos(varphi)])
    nxt = suboptimality(update_noiseless(th, truth).theta_next, truth.theta_star)
    assert nxt.tan_varphi == pytest.approx(recurrence_tan(math.tan(varphi), varphi), rel=1e-10)


def test_cycloid_points():
    x, y = cycloid_point(math.pi, 1)
    assert (x, y) == pytest.approx((0.0, 2 / math.pi), abs=1e-15)
    x, y = cycloid_point(1e-9, 1)
    assert (x, y) == pytest.approx((1.0, 0.0), abs=1e-15)
    x, y = cycloid_point(math.pi / 2, 1)
    assert x == pytest.approx(0.5 + 1 / math.pi, abs=1e-15)
    assert y == pytest.approx(1 / math.pi, abs=1e-15)
    assert cycloid_point(math.pi / 2, -1)[0] == pytest.approx(-x)
    with pytest.raises(ValueError):
        cycloid_point(4.0, 1)


def test_distance_to_optimum():
    assert distance_to_optimum(0.0) == 0.0
    assert distance_to_optimum(math.pi) == pytest.approx(math.hypot(math.pi, 2) / math.pi)


def test_mixing_error_population_examples():
    p = mixing_from_probability(0.7)
    assert mixing_error_population(math.pi / 2, p) == 0.0
    assert mixing_error_population(math.pi / 4, p) == pytest.approx(0.2, abs=1e-15)
    assert mixing_error_population(0.3, mixing_from_probability(0.5)) == 0.0


def _scalar_recurrence_steps(varphi0, eps):
    tan_v, v = math.tan(varphi0), varphi0
    for t in range(1, 100):
        if distance_to_optimum(math.pi - 2 * v) < eps:
            return t
        tan_v = recurrence_tan(tan_v, v)
        v = math.atan(tan_v)


def test_iterate_noiseless_terminates_quickly():
    truth = GroundTruth(np.array([1.0, 0.0, 0.0]), mixing_from_probability(0.7), 0.0)
    th0 = np.array([0.5, math.sqrt(0.75), 0.0])
    run = iterate_noiseless(th0, truth, 50, 1e-8)
    assert run.termination_reason == "rel_tol"
    assert run.terminated_at == _scalar_recurrence_steps(math.asin(0.5), 1e-8)
    assert run.terminated_at <= 12


def test_iterate_noiseless_saddle_invariance():
    truth = GroundTruth(np.array([1.0, 0.0, 0.0]), mixing_from_probability(0.7), 0.0)
    run = iterate_noiseless(np.array([0.0, 1.0, 1.0]), truth, 10, 1e-8)
    assert run.termination_reason == "max_iters"
    assert np.all(run.varphi == 0.0)
    dirs = run.thetas / np.linalg.norm(run.thetas, axis=1, keepdims=True)
    assert np.allclose(dirs, dirs[0], atol=1e-15)


def test_iterate_noiseless_negative_start():
    truth = GroundTruth(np.array([1.0, 0.0]), mixing_from_probability(0.7), 0.0)
    run = iterate_noiseless(np.array([-0.5, math.sqrt(0.75)]), truth, 50, 1e-12)
    assert np.allclose(run.thetas[-1], -truth.theta_star, atol=1e-10)
    # the weight lags one step behind the angle: tanh ν^T = −(2/π)φ^{T−1}·0.4
    assert run.tanh_nus[-1] == pytest.approx(-(2 / math.pi) * run.varphi[-2] * 0.4, abs=1e-15)
    assert run.pi_l1_err[-1] == pytest.approx(mixing_error_population(run.varphi[-2], truth.pi_star),
                                              abs=1e-15)


def test_k0_perturbation_moves_update():
    th = _theta(0.5, 1.5)
    base = update_all_snr(th, 0.1, _truth(3.0))
    with specfun.perturbed_k0(0.99):
        pert = update_all_snr(th, 0.1, _truth(3.0))
    assert pert.tanh_nu_next == pytest.approx(0.99 * base.tanh_nu_next, rel=1e-9)
    assert np.linalg.norm(pert.theta_next - base.theta_next) > 1e-3
