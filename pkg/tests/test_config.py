import math

import numpy as np
import pytest
from scipy.stats import chi2

from uavnav.config import ConfigError, FilterConfig, config_from_dict, dump_config, load_config
from uavnav.state import N_ERR, Variant


def test_defaults_are_valid():
    cfg = FilterConfig()
    assert cfg.variant is Variant.RIEKF
    P = cfg.initial_covariance()
    assert P.shape == (N_ERR, N_ERR)
    assert P[2, 2] == pytest.approx((5 / 57.3) ** 2)
    assert P[6, 6] == pytest.approx(0.04)


def test_dump_and_load_round_trip(tmp_path):
    cfg = FilterConfig().with_noise("R0", sigma_pG2=2.5).with_options(variant="ESEKF", use_mag=False)
    path = tmp_path / "f.toml"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert back == cfg


def test_partial_tables_keep_defaults(tmp_path):
    path = tmp_path / "f.toml"
    path.write_text('[filter]\nvariant = "LIEKF"\n[Q0]\nsigma_a2 = [1e-4, 1e-4, 2e-4]\n')
    cfg = load_config(path)
    assert cfg.variant is Variant.LIEKF
    assert cfg.P0 == FilterConfig().P0
    np.testing.assert_allclose(cfg.process_noise().diag()[3:6], [1e-4, 1e-4, 2e-4])


@pytest.mark.parametrize(
    "data",
    [
        {"bogus": {}},
        {"Q0": {"sigma_x": 1.0}},
        {"Q0": {"sigma_a2": -1.0}},
        {"Q0": {"sigma_a2": [1.0, 2.0]}},
        {"filter": {"variant": "UKF"}},
        {"filter": {"use_gnss": 1}},
        {"filter": {"predictor": "magic"}},
        {"filter": {"gate_probability": 1.0}},
        {"filter": {"sigma_alpha": 0.0}},
        {"R0": 3},
    ],
)
def test_invalid_entries_raise(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_malformed_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[filter\nvariant=")
    with pytest.raises(ConfigError):
        load_config(path)


def test_gate_threshold_is_chi_square_quantile():
    cfg = FilterConfig()
    for dim in (1, 3, 6):
        assert cfg.gate_threshold(dim) == pytest.approx(chi2.ppf(0.999, dim))
    assert cfg.with_options(gate_probability=0.0).gate_threshold(3) == math.inf


def test_mag_variance_is_normalized():
    assert FilterConfig().mag_variance() == pytest.approx(0.01 / 500.0**2)
