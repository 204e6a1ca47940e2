import math

import numpy as np
import pytest

from src.analysis.certifier import TSIRELSON_BOUND, epsilon
from src.analysis.estimator import chsh_from_log
from src.data.schemas import DeviceKind, DeviceModel, RunConfig, SettingsDistribution
from src.devices.simulator import (
    distribution_from_name,
    gen_settings,
    load_run_config,
    run,
    run_config_from_mapping,
)
from src.utils.errors import DomainError


def test_gen_settings_is_deterministic(uniform):
    first = gen_settings(1000, uniform, rng_seed=42)
    assert first.shape == (1000, 2)
    assert first.dtype == np.uint8
    assert np.array_equal(first, gen_settings(1000, uniform, rng_seed=42))
    assert not np.array_equal(first, gen_settings(1000, uniform, rng_seed=43))


def test_gen_settings_frequencies(uniform):
    n = 10**5
    settings_xy = gen_settings(n, uniform, rng_seed=1)
    index = settings_xy[:, 0].astype(int) * 2 + settings_xy[:, 1]
    sigma = math.sqrt(n * 0.25 * 0.75)
    for count in np.bincount(index, minlength=4):
        assert abs(count - n / 4) <= 5 * sigma


def test_gen_settings_follows_biased_law():
    n = 10**5
    dist = SettingsDistribution.biased(0.02)
    settings_xy = gen_settings(n, dist, rng_seed=9)
    zero_zero = np.count_nonzero((settings_xy[:, 0] == 0) & (settings_xy[:, 1] == 0))
    assert abs(zero_zero / n - 0.94) <= 5 * math.sqrt(0.94 * 0.06 / n)


def test_gen_settings_rejects_empty(uniform):
    with pytest.raises(DomainError):
        gen_settings(0, uniform, rng_seed=0)


def test_run_is_reproducible():
    config = RunConfig(n=500, rng_seed=123, device=DeviceModel(visibility=0.9))
    first, second = run(config), run(config)
    for column in "xyab":
        assert np.array_equal(getattr(first, column), getattr(second, column))


def test_honest_run_violates_chsh():
    config = RunConfig(n=20000, rng_seed=5, device=DeviceModel(visibility=1.0))
    estimate = chsh_from_log(run(config), config.dist)
    assert abs(estimate.i_hat - 2 * math.sqrt(2)) <= 5 * estimate.std_error


def test_coverage_of_the_certified_interval():
    # Fraction of runs whose lower end I_hat - eps overshoots the true value
    n, delta, runs = 5000, 0.1, 200
    uniform = SettingsDistribution.uniform()
    true_value = 2 * math.sqrt(2) * 0.9
    eps = epsilon(n, 0.25, delta, TSIRELSON_BOUND)
    misses = 0
    for seed in range(runs):
        config = RunConfig(n=n, rng_seed=seed, device=DeviceModel(visibility=0.9))
        misses += true_value < chsh_from_log(run(config), uniform).i_hat - eps
    assert misses / runs <= delta


@pytest.mark.parametrize(
    "name, q, expected_q",
    [("uniform", None, 0.25), ("biased", 0.1, 0.1), ("product_biased", 0.2, 0.04)],
)
def test_distribution_from_name(name, q, expected_q):
    assert distribution_from_name(name, 100, q).q == pytest.approx(expected_q)


def test_distribution_from_name_catalysis():
    assert distribution_from_name("catalysis", 10**4).q == pytest.approx(0.11)
    assert distribution_from_name("catalysis", 10**4, alpha=5.0).q == pytest.approx(0.05)


def test_distribution_from_name_errors():
    with pytest.raises(ValueError, match="needs q"):
        distribution_from_name("biased", 100)
    with pytest.raises(ValueError, match="Unknown input distribution"):
        distribution_from_name("zipf", 100)


def test_run_config_from_mapping():
    config = run_config_from_mapping(
        {
            "device": "deterministic",
            "n": "250",
            "a_table": "1,0",
            "b_table": "1 1",
            "input_dist": "biased",
            "q": "0.1",
            "rng_seed": "7",
        }
    )
    assert config.n == 250
    assert config.rng_seed == 7
    assert config.device.kind == DeviceKind.DETERMINISTIC
    assert config.device.a_table == (1, 0)
    assert config.device.b_table == (1, 1)
    assert config.dist.q == pytest.approx(0.1)


def test_run_config_from_mapping_errors():
    with pytest.raises(ValueError, match="Unknown run config keys"):
        run_config_from_mapping({"n": "10", "colour": "blue"})
    with pytest.raises(ValueError, match="needs n"):
        run_config_from_mapping({"device": "honest"})


def test_load_run_config(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("# honest run\ndevice=honest\nn=3016\nvisibility=0.8536\nphi_b0_deg=40\n")
    config = load_run_config(path)
    assert config.n == 3016
    assert config.device.visibility == pytest.approx(0.8536)
    assert config.device.phi_b_deg == (40.0, 135.0)
    assert config.dist.is_uniform


def test_load_run_config_n_override_rebuilds_catalysis_inputs(tmp_path):
    path = tmp_path / "catalysis.env"
    path.write_text("input_dist=catalysis\nn=2500\nalpha=10\n")
    assert load_run_config(path).dist.q == pytest.approx(10 / 50)
    config = load_run_config(path, n=40000)
    assert config.n == 40000
    assert config.dist.q == pytest.approx(10 / 200)


def test_load_run_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / "absent.env")
