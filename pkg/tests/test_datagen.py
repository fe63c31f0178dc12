import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlr_em.datagen import (
    GenSpec,
    batch_stream,
    derive_seed,
    generate,
    sample_initial_with_angle,
    sample_unit_sphere,
    trial_rng,
)
from mlr_em.model import GroundTruth, mixing_from_probability, suboptimality


def _truth(p1=0.7, sigma=0.1, d=3):
    return GroundTruth(np.arange(1.0, d + 1), mixing_from_probability(p1), sigma)


def test_noiseless_responses_are_exact():
    ds = generate(GenSpec(500, 3, _truth(sigma=0.0), 11))
    signal = ds.x @ np.arange(1.0, 4.0)
    assert np.array_equal(np.abs(ds.y), np.abs(signal))
    assert np.array_equal(ds.y, np.where(ds.z == 1, signal, -signal))


def test_degenerate_mixture_all_first_component():
    ds = generate(GenSpec(1000, 3, _truth(p1=1.0), 3))
    assert np.all(ds.z == 1)


def test_label_frequency_band():
    ds = generate(GenSpec(5000, 3, _truth(), 2024))
    assert abs(np.mean(ds.z == 1) - 0.7) <= 3 * math.sqrt(0.7 * 0.3 / 5000)


def test_noise_level():
    truth = _truth(sigma=2.0)
    ds = generate(GenSpec(20000, 3, truth, 8))
    signal = ds.x @ truth.theta_star
    resid = ds.y - np.where(ds.z == 1, signal, -signal)
    assert np.std(resid) == pytest.approx(2.0, rel=0.03)


def test_generate_is_deterministic():
    a = generate(GenSpec(50, 3, _truth(), 99))
    b = generate(GenSpec(50, 3, _truth(), 99))
    c = generate(GenSpec(50, 3, _truth(), 100))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)
    assert a.seed == 99


def test_genspec_validation():
    with pytest.raises(ValueError):
        GenSpec(10, 4, _truth(), 0)
    with pytest.raises(ValueError):
        GenSpec(0, 3, _truth(), 0)
    with pytest.raises(ValueError):
        GenSpec(10, 3, _truth(), -1)


def test_batch_stream_fresh_batches():
    it = batch_stream(GenSpec(10, 3, _truth(), 4), 6)
    a, b = next(it), next(it)
    assert a.n == b.n == 6
    assert not np.array_equal(a.x, b.x)
    again = next(batch_stream(GenSpec(10, 3, _truth(), 4), 6))
    assert np.array_equal(a.x, again.x)


def test_streams_independent_of_order():
    s = [derive_seed(7, k) for k in range(5)]
    assert len(set(s)) == 5
    assert derive_seed(7, 3) == s[3]
    assert all(0 <= v < 2**64 for v in s)
    g = trial_rng(7, 1)
    assert trial_rng(g) is g
    assert trial_rng(7, 1).random() == trial_rng(7, 1).random()


def test_unit_sphere_examples():
    assert sample_unit_sphere(1, 5)[0] in (1.0, -1.0)
    v = sample_unit_sphere(3, 5)
    assert abs(np.linalg.norm(v) - 1) <= 1e-15
    assert np.array_equal(v, sample_unit_sphere(3, 5))
    with pytest.raises(ValueError):
        sample_unit_sphere(0, 1)


def test_unit_sphere_mean_concentrates():
    rng = trial_rng(17)
    draws = np.array([sample_unit_sphere(50, rng) for _ in range(10_000)])
    assert np.linalg.norm(draws.mean(axis=0)) <= 4 / math.sqrt(10_000)


@pytest.mark.parametrize(
    "varphi0,abs_rho",
    [(math.atan(1.5), 1.5 / math.sqrt(3.25)), (0.3, math.sin(0.3))],
)
def test_initial_angle_examples(varphi0, abs_rho):
    ts = np.arange(1.0, 51.0)
    th = sample_initial_with_angle(ts, varphi0, 3)
    assert np.linalg.norm(th) == pytest.approx(1.0, abs=1e-15)
    assert abs(suboptimality(th, ts).rho) == pytest.approx(abs_rho, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=math.pi / 2), st.integers(2, 60), st.integers(0, 2**32))
def test_initial_angle_property(varphi0, d, seed):
    ts = np.ones(d)
    th = sample_initial_with_angle(ts, varphi0, seed)
    assert suboptimality(th, ts).varphi == pytest.approx(varphi0, abs=1e-12)


def test_initial_angle_edges():
    ts = np.array([0.0, 2.0])
    assert np.array_equal(sample_initial_with_angle(ts, math.pi / 2, 0), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        sample_initial_with_angle(ts, 0.0, 0)
    with pytest.raises(ValueError):
        sample_initial_with_angle(np.array([1.0]), 0.3, 0)
    with pytest.raises(ValueError):
        sample_initial_with_angle(np.zeros(2), 0.3, 0)
