import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlr_em.diagnostics import (
    McEstimate,
    abs_quadratic_expectation,
    convergence_exponent,
    cycloid_residual,
    grothendieck_expectation,
    mc_abs_quadratic,
    mc_grothendieck,
    mc_population_oracle,
    pi_l1_error,
    theta_relative_error,
)
from mlr_em.model import GroundTruth, MixingState, mixing_from_probability
from mlr_em.population import iterate_noiseless, update_noiseless

E1 = np.array([1.0, 0.0, 0.0])
DIAG = np.array([1.0, 1.0, 0.0])
ORTH = np.array([0.0, 1.0, 0.0])


def test_grothendieck_examples():
    assert grothendieck_expectation(2 * E1, E1) == pytest.approx(1.0, abs=1e-15)
    assert grothendieck_expectation(ORTH, E1) == 0.0
    assert grothendieck_expectation(DIAG, E1) == pytest.approx(0.5, abs=1e-15)
    assert grothendieck_expectation(-DIAG, E1) == pytest.approx(-0.5, abs=1e-15)
    est = mc_grothendieck(DIAG, E1, 1_000_000, seed=1)
    assert abs(est.mean - 0.5) <= 4e-3
    assert est.within(0.5, 4)


def test_abs_quadratic_examples():
    assert abs_quadratic_expectation(3 * E1, 2 * E1) == pytest.approx(6.0, rel=1e-15)
    assert abs_quadratic_expectation(ORTH, E1) == pytest.approx(2 / math.pi, rel=1e-15)
    v = abs_quadratic_expectation(DIAG / math.sqrt(2), E1)
    assert v == pytest.approx((2 / math.pi) * (math.pi / 4 * math.sqrt(0.5) + math.sqrt(0.5)), rel=1e-14)
    assert v == pytest.approx(0.8037115, abs=1e-7)
    assert mc_abs_quadratic(DIAG / math.sqrt(2), E1, 1_000_000, seed=2).within(v, 4)


def test_identity_zero_norm_rejected():
    with pytest.raises(ValueError):
        grothendieck_expectation(np.zeros(3), E1)
    with pytest.raises(ValueError):
        abs_quadratic_expectation(E1, np.zeros(3))


def test_mc_oracle_noiseless_fixed_point():
    truth = GroundTruth(np.array([1.0, -2.0, 0.5]), mixing_from_probability(0.7), 0.0)
    m_est, n_est = mc_population_oracle(truth.theta_star, 0.0, truth, 400_000, seed=3)
    assert np.all(m_est.within(truth.theta_star, 4))
    assert n_est.within(0.4, 4)


def test_mc_oracle_noiseless_matches_closed_form():
    truth = GroundTruth(np.array([1.0, 0.0, 0.0]), mixing_from_probability(0.7), 0.0)
    th = np.array([0.4, 1.0, -0.3])
    up = update_noiseless(th, truth)
    m_est, n_est = mc_population_oracle(th, 0.0, truth, 1_000_000, seed=4)
    assert np.all(m_est.within(up.theta_next, 4))
    assert n_est.within(up.tanh_nu_next, 4)


def test_mc_standard_error_scaling():
    truth = GroundTruth(np.array([3.0, 0.0]), MixingState(0.4), 1.0)
    th = np.array([1.0, 1.0])
    a, _ = mc_population_oracle(th, 0.1, truth, 1_000_000, seed=5)
    b, _ = mc_population_oracle(th, 0.1, truth, 4_000_000, seed=6)
    ratio = np.asarray(b.std_error) / np.asarray(a.std_error)
    assert np.all(np.abs(ratio - 0.5) <= 0.1)


def test_mc_sharding_is_deterministic_and_thread_independent():
    a = mc_grothendieck(DIAG, E1, 100_003, seed=7, chunk=10_000)
    b = mc_grothendieck(DIAG, E1, 100_003, seed=7, chunk=10_000, workers=4)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert a.n_shards == 11
    c = mc_grothendieck(DIAG, E1, 100_003, seed=8, chunk=10_000)
    assert c.mean != a.mean
    with pytest.raises(ValueError):
        mc_grothendieck(DIAG, E1, 1, seed=0)


def test_mc_estimate_z_score():
    e = McEstimate(np.array([1.0, 2.0]), np.array([0.5, 0.0]), 10, 0)
    assert np.array_equal(e.z_score([2.0, 2.0]), [2.0, 0.0])
    assert np.isinf(e.z_score([1.0, 3.0])[1])
    assert list(e.within([2.0, 2.0], 1)) == [False, True]


@pytest.mark.parametrize("d", [2, 3, 50])
def test_cycloid_residual_population_runs(d):
    rng = np.random.default_rng(d)
    ts = rng.standard_normal(d)
    th0 = rng.standard_normal(d)
    run = iterate_noiseless(th0, GroundTruth(ts, MixingState(0.2), 0.0), 40, 1e-14)
    res = cycloid_residual(run, th0, ts)
    assert res.in_plane <= 1e-10 and res.out_of_plane <= 1e-10


def test_cycloid_residual_single_iterate_and_errors():
    ts = np.array([1.0, 0.0])
    th0 = np.array([0.3, 0.8])
    run = iterate_noiseless(th0, GroundTruth(ts, MixingState(0.0), 0.0), 1, 1e-14)
    res = cycloid_residual(run, th0, ts)
    assert math.isfinite(res.in_plane) and res.in_plane <= 1e-12
    with pytest.raises(ValueError):
        cycloid_residual(run, ts, ts)


def test_convergence_exponent_examples():
    s = [2.0]
    for _ in range(5):
        s.append(s[-1] ** 2)
    slope, icpt = convergence_exponent(s)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert icpt == pytest.approx(0.0, abs=1e-10)
    assert convergence_exponent([5 * 0.3**t for t in range(8)])[0] == pytest.approx(1.0, abs=1e-12)


def test_convergence_exponent_errors():
    with pytest.raises(ValueError):
        convergence_exponent([1.0, 2.0])
    with pytest.raises(ValueError):
        convergence_exponent([1.0, -2.0, 3.0])


@settings(max_examples=50)
@given(st.floats(min_value=1.1, max_value=3.0), st.floats(min_value=0.5, max_value=3.0),
       st.floats(min_value=-2.0, max_value=2.0))
def test_convergence_exponent_recovers_power_law(p, s0, logc):
    s = [s0]
    for _ in range(4):
        s.append(math.exp(logc) * s[-1] ** p)
    if not all(0 < v < 1e300 for v in s):
        return
    assert convergence_exponent(s)[0] == pytest.approx(p, abs=1e-9)


def test_error_metrics():
    ts = np.array([3.0, 4.0])
    assert theta_relative_error(ts, ts) == 0.0
    assert theta_relative_error(-ts, ts, -1) == 0.0
    assert theta_relative_error(np.zeros(2), ts) == 1.0
    with pytest.raises(ValueError):
        theta_relative_error(ts, np.zeros(2))
    p = mixing_from_probability(0.6)
    ps = mixing_from_probability(0.7)
    assert pi_l1_error(p, ps, 1) == pytest.approx(0.2, abs=1e-15)
    assert pi_l1_error(mixing_from_probability(0.3), ps, -1) == pytest.approx(0.0, abs=1e-15)
