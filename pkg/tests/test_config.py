"""
Tests for scenario parsing and validation
"""

import json

import pytest

from bhil.config import apply_overrides, dump_scenario, parse_scenario, validate_scenario
from bhil.core.model import ConstantModel
from bhil.exceptions import AssumptionViolation, ConfigError

SCENARIO_TOML = """
name = "crosswell-small"
seed = 7

[geometry]
kind = "crosswell"
n_s = 8
receivers = { lo = 0.2, hi = 1.8, n = 8 }
time_axis = { lo = 0.05, hi = 4.0, n = 1024 }

[grid]
origin = [0.2, -0.3, 0.7]
spacing = [0.1, 0.1, 0.1]
dims = [7, 7, 7]

[reflectivity]
depth_floor = 0.3
scatterers = [{ position = [0.5, 0.2, 1.0], amplitude = 1.0 }]
"""


def minimal():
    return {
        "geometry": {"kind": "crosswell", "n_s": 8},
        "grid": {"origin": [0.2, -0.3, 0.7], "spacing": [0.1, 0.1, 0.1], "dims": [7, 7, 7]},
    }


def test_defaults():
    scenario = validate_scenario(minimal())
    assert isinstance(scenario.build_model(), ConstantModel)
    assert scenario.wavelet.f_peak == 20.0
    assert scenario.analysis.ramp_order == 2
    assert scenario.psf_scatterer() == (0.5, 0.3, 1.0)


def test_unknown_key_named():
    data = minimal()
    data["bogus"] = 1
    with pytest.raises(ConfigError, match="unknown key 'bogus'"):
        validate_scenario(data)


def test_unknown_nested_key_named():
    data = minimal()
    data["geometry"]["n_src"] = 4
    with pytest.raises(ConfigError, match="unknown key 'geometry.n_src'"):
        validate_scenario(data)


def test_missing_section_named():
    data = minimal()
    del data["grid"]
    with pytest.raises(ConfigError, match="missing key 'grid'"):
        validate_scenario(data)


def test_depth_floor_must_be_positive():
    data = minimal()
    data["reflectivity"] = {"depth_floor": 0.0}
    with pytest.raises(AssumptionViolation, match="Assumption 3.1"):
        validate_scenario(data)


def test_nyquist_enforced():
    data = minimal()
    data["wavelet"] = {"f_peak": 200.0}
    with pytest.raises(AssumptionViolation, match="Nyquist"):
        validate_scenario(data)


def test_overrides():
    data = apply_overrides(minimal(), ["wavelet.f_peak=15", "name=override-check", "geometry.receivers.n=16"])
    assert data["wavelet"]["f_peak"] == 15
    assert data["name"] == "override-check"
    assert data["geometry"]["receivers"] == {"n": 16}
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(minimal(), ["wavelet.f_peak"])


def test_parse_resolves_derived_defaults(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(SCENARIO_TOML)
    scenario = parse_scenario(path, ["wavelet.f_peak=15.0"])
    assert scenario.name == "crosswell-small"
    assert scenario.wavelet.f_peak == 15.0
    assert scenario.geometry.epsilon == pytest.approx(0.05 * 2.0)
    assert scenario.wavelet.support_halfwidth is not None


def test_dump_is_a_fixed_point(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(SCENARIO_TOML)
    first = dump_scenario(parse_scenario(path))
    resolved = tmp_path / "resolved.json"
    resolved.write_text(first)
    second = dump_scenario(parse_scenario(resolved))
    assert first == second
    assert json.loads(first)["seed"] == 7


def test_malformed_toml(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[geometry\nkind = 1")
    with pytest.raises(ConfigError, match="malformed TOML"):
        parse_scenario(path)
