"""
Tests for package settings, environment configuration and run files.
"""
from pathlib import Path

import pytest

from unfitted_hdg.core.config import Config
from unfitted_hdg.core.errors import ConfigurationError
from unfitted_hdg.core.run_config import load_run_config, parse_run_config
from unfitted_hdg.core.settings import DEFAULT_SETTINGS, load_settings, merge_settings

RUNS_DIR = Path(__file__).resolve().parents[1] / "config" / "runs"


def _minimal(**overrides):
    data = {"boundary": {"kind": "circle"}, "problem": {"g": "x"}, "mesh": {"h": [0.3]}}
    data.update(overrides)
    return data


def test_minimal_run_takes_defaults_from_settings():
    config = parse_run_config(_minimal(), DEFAULT_SETTINGS)
    assert config.subcommand == "solve"
    assert config.k == 1
    assert config.tau == 1.0
    assert config.picard.max_iters == 100
    assert config.mesh.beta_max == 5.0
    assert config.acceptance.size_measure == "target"
    assert not config.problem.manufactured


def test_settings_override_defaults():
    settings = merge_settings(DEFAULT_SETTINGS, {"discretization": {"degree": 2}, "picard": {"tol": 1e-6}})
    config = parse_run_config(_minimal(), settings)
    assert config.k == 2
    assert config.picard.tol == 1e-6
    assert config.picard.max_iters == 100


@pytest.mark.parametrize(
    "data, field",
    [
        (_minimal(k=7), "k"),
        (_minimal(mesh={"h": [0.3], "bogus": 1}), "mesh.bogus"),
        (_minimal(problem={"kappa": "1"}), "problem"),
        (_minimal(mesh={"beta_max": 4.0}), "mesh"),
        (_minimal(mesh={"h": [0.1, 0.2]}), "mesh"),
        (_minimal(boundary={"kind": "parametric", "x": "cos(2*pi*t)"}), "boundary"),
        (_minimal(subcommand="plot"), "subcommand"),
        (_minimal(tau=-1.0), "tau"),
    ],
)
def test_invalid_runs_name_the_offending_field(data, field):
    with pytest.raises(ConfigurationError) as info:
        parse_run_config(data, DEFAULT_SETTINGS)
    assert info.value.field == field
    assert info.value.exit_code == 2


def test_run_must_be_a_mapping():
    with pytest.raises(ConfigurationError) as info:
        parse_run_config(["solve"], DEFAULT_SETTINGS)
    assert info.value.field == "config"


def test_base_size_with_halvings():
    config = parse_run_config(_minimal(mesh={"base_h": 0.4, "halvings": 2}), DEFAULT_SETTINGS)
    assert config.mesh.sizes() == [0.4, 0.2, 0.1]
    assert config.mesh.policy_dict()["gap_fraction"] == 0.25


def test_config_hash_is_stable_and_sensitive():
    first = parse_run_config(_minimal(), DEFAULT_SETTINGS).config_hash()
    second = parse_run_config(_minimal(), DEFAULT_SETTINGS).config_hash()
    changed = parse_run_config(_minimal(tau=2.0), DEFAULT_SETTINGS).config_hash()
    assert first == second
    assert first != changed
    assert len(first) == 64


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_run_config(tmp_path / "absent.yaml")
    assert info.value.field == "config"


def test_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("boundary: [circle\n")
    with pytest.raises(ConfigurationError):
        load_run_config(path, DEFAULT_SETTINGS)


@pytest.mark.parametrize("path", sorted(RUNS_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_run_files_validate(path):
    config = load_run_config(path)
    assert config.mesh.sizes()


def test_settings_file_fallback(tmp_path):
    assert load_settings(tmp_path / "missing.yaml") == DEFAULT_SETTINGS
    path = tmp_path / "settings.yaml"
    path.write_text("picard:\n  max_iters: 5\n")
    settings = load_settings(path)
    assert settings["picard"]["max_iters"] == 5
    assert settings["picard"]["tol"] == DEFAULT_SETTINGS["picard"]["tol"]


def test_output_directory_honours_the_environment(monkeypatch):
    monkeypatch.setattr(Config, "OUTPUT_DIR", None)
    monkeypatch.delenv("UNFITTED_HDG_OUTPUT_DIR", raising=False)
    assert Config.output_dir("results") == "results"
    monkeypatch.setenv("UNFITTED_HDG_OUTPUT_DIR", "/tmp/elsewhere")
    assert Config.output_dir("results") == "/tmp/elsewhere"
