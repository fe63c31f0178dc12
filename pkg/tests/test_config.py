import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlr_em import config
from mlr_em.config import ConfigError, ExperimentConfig, dumps, loads


def test_defaults():
    cfg = loads("")
    assert cfg.trajectory.d == 2 and cfg.trajectory.n == 5000 and cfg.trajectory.trials == 60
    assert cfg.convergence.snr_list == [1e6, 1e7, 1e8]
    assert cfg.convergence.varphi0 == pytest.approx(math.atan(1.5))
    assert cfg.mixing.varphi0 == 0.3
    assert cfg.weights_compare.pi_star_list == [0.6, 0.8, 1.0]
    assert cfg.validate.suites == ["specfun", "population", "diagnostics"]


def test_parse_values():
    cfg = loads("""
[global]
output_dir = results
workers = 2
exact_noiseless = yes
[convergence]
snr_list = 1e6, 1e8
population_mode = true
trials = 1e1
[validate]
suites = specfun
mc_draws = 10000
""")
    assert cfg.global_.output_dir == "results"
    assert cfg.global_.n_workers() == 2
    assert cfg.global_.exact_noiseless is True
    assert cfg.convergence.snr_list == [1e6, 1e8]
    assert cfg.convergence.population_mode is True
    assert cfg.convergence.trials == 10
    assert cfg.validate.suites == ["specfun"]


@pytest.mark.parametrize(
    "text",
    [
        "[nope]\nx = 1\n",
        "[trajectory]\ncolour = red\n",
        "[trajectory]\ntrials = 0\n",
        "[trajectory]\nd = 1\n",
        "[trajectory]\nn = 2.5\n",
        "[convergence]\nvarphi0 = 2.0\n",
        "[convergence]\niterations = 1\n",
        "[mixing]\nsnr_list = -1\n",
        "[weights_compare]\npi_star_list = 0.5, 1.5\n",
        "[validate]\nsuites = everything\n",
        "[validate]\nmc_draws = 10\n",
        "[global]\nworkers = -1\n",
        "[global]\nquad_truncation_exponent = 10\n",
        "[global]\nexact_noiseless = maybe\n",
        "not an ini file",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        loads(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "absent.ini")


def test_round_trip_defaults():
    cfg = ExperimentConfig()
    assert loads(dumps(cfg)) == cfg


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 200),
    st.lists(st.floats(min_value=1e-3, max_value=1e12), min_size=1, max_size=4),
    st.floats(min_value=1e-3, max_value=1.5),
    st.integers(0, 2**64 - 1),
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=3),
    st.booleans(),
)
def test_round_trip_property(d, snrs, varphi0, seed, pis, flag):
    cfg = ExperimentConfig()
    cfg.trajectory.d = d
    cfg.trajectory.n = max(cfg.trajectory.n, d)
    cfg.convergence.snr_list = snrs
    cfg.convergence.varphi0 = varphi0
    cfg.convergence.population_mode = flag
    cfg.mixing.seed = seed
    cfg.weights_compare.pi_star_list = pis
    cfg.global_.exact_noiseless = flag
    cfg.check()
    assert loads(dumps(cfg)) == cfg
