"""
Tests for CLI functionality
"""

import json

import pytest

from bhil.cli import build_registry, enabled_stages, error_line, exit_code_for, main, run
from bhil.config import STAGES, validate_scenario
from bhil.exceptions import AssumptionViolation, GridFormatError, NumericalError
from bhil.utils.gridio import read_grid

SMALL = {
    "name": "crosswell-small",
    "seed": 3,
    "geometry": {
        "kind": "crosswell",
        "n_s": 6,
        "receivers": {"lo": 0.2, "hi": 1.8, "n": 6},
        "time_axis": {"lo": 0.05, "hi": 4.0, "n": 1024},
    },
    "grid": {"origin": [0.3, -0.2, 0.8], "spacing": [0.1, 0.1, 0.1], "dims": [5, 5, 5]},
    "reflectivity": {"depth_floor": 0.3, "scatterers": [{"position": [0.5, 0.1, 1.0]}]},
    "wavelet": {"f_peak": 15.0},
}


@pytest.fixture
def scenario():
    return validate_scenario(json.loads(json.dumps(SMALL))).resolved()


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_registry_lists_every_stage():
    assert sorted(build_registry().list_commands()) == sorted(STAGES)


def test_list_commands(capsys):
    assert main(["--list-commands"]) == 0
    out = capsys.readouterr().out
    for name in STAGES:
        assert name in out


def test_missing_scenario_is_usage_error(capsys):
    assert main(["simulate"]) == 2
    assert "bhil-error code=2 kind=UsageError" in capsys.readouterr().err


def test_error_line_format():
    line = error_line(2, "ConfigError", 'unknown key "x"\n  here')
    assert line == 'bhil-error code=2 kind=ConfigError message="unknown key \\"x\\" here"'


@pytest.mark.parametrize(
    "error, code",
    [
        (AssumptionViolation("Nyquist", "dt too large"), 2),
        (NumericalError("no finite result"), 3),
        (GridFormatError("bad magic"), 4),
        (FileNotFoundError("missing.toml"), 4),
        (KeyError("n"), 2),
        (RuntimeError("boom"), 3),
    ],
)
def test_exit_code_for(error, code):
    assert exit_code_for(error) == code


def test_enabled_stages_follow_toggles(scenario):
    stages = enabled_stages(scenario)
    assert stages[:3] == ["simulate", "migrate", "psf"]
    assert "classify-caustics" not in stages
    assert "artifact-study" not in stages


def test_simulate_writes_manifest(tmp_path, scenario):
    result = run(scenario, "simulate", tmp_path / "out")
    assert result.status == 0
    assert result.artifacts == [
        "data.bhil", "mute_log.jsonl", "reflectivity.bhil", "resolved_config.json", "summary.jsonl",
    ]
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert manifest["scenario"] == "crosswell-small"
    assert [a["name"] for a in manifest["artifacts"]] == result.artifacts
    data = read_grid(result.out_dir / "data.bhil")
    assert data.values.shape == (6, 6, 1024)
    assert data.metadata["amplitude_convention"] == "green_function"


def test_migrate_runs_simulation_first(tmp_path, scenario):
    result = run(scenario, "migrate", tmp_path / "out")
    (summary,) = result.summaries
    assert summary["stage"] == "migrate"
    assert "image.bhil" in result.artifacts
    assert "image_y2_point.csv" in result.artifacts


def test_unknown_key_exit_code(tmp_path, capsys):
    bad = dict(SMALL, colour="blue")
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "out"), "--quiet"]) == 2
    assert "unknown key 'colour'" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "absent.toml"), "--quiet"]) == 4
    assert "bhil-error code=4" in capsys.readouterr().err


def test_main_simulate(tmp_path, scenario_file):
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(scenario_file), "--out", str(out), "--threads", "1", "--quiet"]) == 0
    assert (out / "manifest.json").exists()
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["seed"] == 3


def test_seed_flag_overrides_scenario(tmp_path, scenario_file):
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(scenario_file), "--out", str(out), "--seed", "11", "--quiet"]) == 0
    assert json.loads((out / "resolved_config.json").read_text())["seed"] == 11


@pytest.mark.slow
def test_manifest_is_deterministic(tmp_path, scenario_file):
    manifests = []
    for threads in ("1", "2"):
        out = tmp_path / f"out{threads}"
        args = ["simulate", "--scenario", str(scenario_file), "--out", str(out), "--threads", threads, "--quiet"]
        assert main(args) == 0
        manifests.append((out / "manifest.json").read_text())
    assert manifests[0] == manifests[1]
