"""
End-to-end tests of the command line and the run orchestrator.
"""
import json

import pytest
import yaml

from unfitted_hdg.core.run_config import load_run_config
from unfitted_hdg.core.solver import UnfittedHDGSolver
from unfitted_hdg.interfaces.cli import build_parser, run_cli


def _write_run(tmp_path, data):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def _check_mesh_run(tau):
    return {
        "subcommand": "check-mesh",
        "k": 0,
        "tau": tau,
        "boundary": {"kind": "circle"},
        "problem": {"g": "0"},
        "mesh": {"h": [0.3]},
    }


def test_parser_requires_a_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["--config", "run.yaml", "--strict"])
    assert args.strict
    assert args.out is None


def test_invalid_run_exits_with_configuration_status(tmp_path):
    config = _write_run(tmp_path, {"k": 7, "boundary": {"kind": "circle"}, "problem": {"g": "0"}, "mesh": {"h": [0.3]}})
    assert run_cli(["--config", config, "--out", str(tmp_path / "out"), "--quiet"]) == 2


def test_missing_run_file_exits_with_configuration_status(tmp_path):
    assert run_cli(["--config", str(tmp_path / "absent.yaml"), "--quiet"]) == 2


def test_check_mesh_writes_reports(tmp_path):
    out = tmp_path / "out"
    config = _write_run(tmp_path, _check_mesh_run(1.0))
    assert run_cli(["--config", config, "--out", str(out), "--quiet", "--strict"]) == 0
    report = json.loads((out / "admissibility_0.json").read_text())
    assert report["admissibility"]["overall_ok"] is True
    assert len(report["config_sha256"]) == 64
    assert report["coverage"]["relative_error"] < 1e-8


def test_admissibility_failure_is_fatal_only_in_strict_mode(tmp_path):
    config = _write_run(tmp_path, _check_mesh_run(1.0e6))
    assert run_cli(["--config", config, "--out", str(tmp_path / "strict"), "--quiet", "--strict"]) == 3
    assert (tmp_path / "strict" / "admissibility_0.json").exists()
    assert run_cli(["--config", config, "--out", str(tmp_path / "lenient"), "--quiet"]) == 0


def test_project_test_run(tmp_path):
    out = tmp_path / "out"
    data = {
        "subcommand": "project-test",
        "k": 1,
        "seed": 11,
        "boundary": {"kind": "circle"},
        "problem": {"g": "0"},
        "mesh": {"h": [0.3]},
        "project_test": {"elements": 10, "fields": 1},
    }
    assert run_cli(["--config", _write_run(tmp_path, data), "--out", str(out), "--quiet"]) == 0
    checks = json.loads((out / "project_test.json").read_text())
    assert checks["passed"] is True
    assert checks["seed"] == 11


def test_manufactured_solve_writes_artifacts(tmp_path):
    data = {
        "subcommand": "solve",
        "k": 1,
        "boundary": {"kind": "circle"},
        "problem": {"kappa": "2 + sin(u)", "kappa_lo": 1.0, "kappa_hi": 3.0, "u_exact": "x + 0.5*y"},
        "mesh": {"h": [0.3]},
        "output": {"export_mesh": True, "export_skeleton": True},
    }
    config = load_run_config(_write_run(tmp_path, data))
    solver = UnfittedHDGSolver(config, out_dir=tmp_path / "out")
    artifacts = solver.solve()
    assert {"admissibility", "solution", "trace", "summary", "mesh", "skeleton"} <= set(artifacts)
    summary = json.loads(artifacts["summary"].read_text())
    assert summary["config_sha256"] == config.config_hash()
    assert summary["max_conservation_residual"] < 1e-10
    assert 0 < summary["errors"]["u"] < 0.05
    assert summary["solution"]["elements"] == summary["mesh"]["elements"]
    trace = json.loads(artifacts["trace"].read_text())
    assert trace["converged"] is True
    assert artifacts["skeleton"].read_text().startswith(f"# config-sha256: {config.config_hash()}")


def test_study_without_manufactured_solution_is_a_configuration_error(tmp_path):
    data = {
        "subcommand": "study",
        "boundary": {"kind": "circle"},
        "problem": {"g": "x"},
        "mesh": {"h": [0.4, 0.2]},
    }
    assert run_cli(["--config", _write_run(tmp_path, data), "--out", str(tmp_path / "out"), "--quiet"]) == 2


@pytest.mark.slow
def test_kappa_of_u_study_reaches_optimal_rates(tmp_path):
    data = {
        "subcommand": "study",
        "k": 1,
        "boundary": {"kind": "circle"},
        "problem": {"kappa": "2 + sin(u)", "kappa_lo": 1.0, "kappa_hi": 3.0, "u_exact": "exp(x)*sin(y)"},
        "mesh": {"h": [0.4, 0.2, 0.1]},
        "picard": {"tol": 1.0e-10, "max_iters": 100},
        "acceptance": {"norms": ["u"], "coarsest_band": 1.0, "finest_band": 0.3},
    }
    out = tmp_path / "out"
    assert run_cli(["--config", _write_run(tmp_path, data), "--out", str(out), "--quiet"]) == 0
    study = json.loads((out / "study.json").read_text())
    assert abs(study["rates"][-1]["u"] - 2.0) <= 0.3
    assert (out / "errors.csv").exists()
    assert (out / "u.dat").exists()
