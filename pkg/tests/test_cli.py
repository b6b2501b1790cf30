"""CLI command tests for rc-treatment-effects."""

import json

import numpy as np
from typer.testing import CliRunner

from rc_treatment_effects import runtime as runtime_module
from rc_treatment_effects.cli import app
from rc_treatment_effects.estimation.base import Sample
from rc_treatment_effects.replication import ReplicationOutcome

runner = CliRunner()


def _quiet_env(monkeypatch):
    monkeypatch.setenv("RCTE_WORKERS", "1")
    monkeypatch.setenv("RCTE_METRICS_BACKEND", "logging")
    monkeypatch.setenv("RCTE_PROGRESS_LOGGING", "false")


def test_simulate_writes_sample(tmp_path):
    out = tmp_path / "nested" / "sample.csv"
    result = runner.invoke(app, ["simulate", "--n", "200", "--seed", "1", "--out", str(out)])

    assert result.exit_code == 0, result.output
    sample = Sample.read_csv(out)
    assert sample.n == 200
    assert set(np.unique(sample.d)) <= {0, 1}


def test_simulate_rejects_unknown_design(tmp_path):
    result = runner.invoke(app, ["simulate", "--dgp", "probit", "--out", str(tmp_path / "s.csv")])
    assert result.exit_code == 2
    assert "Configuration error" in result.output


def test_estimate_rejects_unknown_target(tmp_path):
    result = runner.invoke(app, ["estimate", "--what", "median", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "--what" in result.output


def test_estimate_reports_missing_config(tmp_path):
    result = runner.invoke(app, ["estimate", "--what", "ate", "--config", str(tmp_path / "missing.json")])
    assert result.exit_code == 2
    assert "Configuration error" in result.output


def test_estimate_rejects_bad_delta_grid(tmp_path, monkeypatch):
    _quiet_env(monkeypatch)
    result = runner.invoke(app, ["estimate", "--what", "fdelta", "--deltas", "5,1,10", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_estimate_without_treatment_variation_exits_with_code(tmp_path, monkeypatch):
    _quiet_env(monkeypatch)
    n = 50
    path = tmp_path / "treated.csv"
    Sample(
        y=np.linspace(0.0, 1.0, n),
        d=np.ones(n, dtype=int),
        phi_angle=np.full(n, 1.0),
        v=np.linspace(-1.0, 1.0, n),
    ).to_csv(path)

    result = runner.invoke(app, ["estimate", "--what", "density", "--sample", str(path), "--out", str(tmp_path)])

    assert result.exit_code == 3
    assert "no_treatment_variation" in result.output


def test_oracle_writes_golden_file(tmp_path):
    result = runner.invoke(app, ["oracle", "--out", str(tmp_path), "--skip-radon"])

    assert result.exit_code == 0, result.output
    golden = json.loads((tmp_path / "golden.json").read_text(encoding="utf-8"))
    assert golden["ucate_at_mode"] == 4.0
    assert not any(key.startswith("radon_") for key in golden)


def test_mc_runs_study_and_writes_tables(tmp_path, monkeypatch):
    _quiet_env(monkeypatch)

    def _fake(task):
        return ReplicationOutcome(
            index=task.index, seed=task.index, status="ok", n=task.study.n, ate={"B1": 4.0}, tt={"B1": 4.5}
        )

    monkeypatch.setattr(runtime_module, "run_replication", _fake)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"study": {"S": 2, "boxes": [[-1.5, 3.5, -3, 2]]}}), encoding="utf-8")

    result = runner.invoke(app, ["mc", "--config", str(config), "--out", str(tmp_path / "out")])

    assert result.exit_code == 0, result.output
    assert "ATE_1" in result.output
    assert (tmp_path / "out" / "table_effects.csv").exists()
    summary = json.loads((tmp_path / "out" / "study.json").read_text(encoding="utf-8"))
    assert summary["completed"] == 2
    assert summary["incomplete"] is False


def test_converge_prints_slope(tmp_path, monkeypatch):
    _quiet_env(monkeypatch)
    monkeypatch.setattr(runtime_module, "replication_error", lambda cfg, index, estimand, norm: cfg.n**-0.5)

    result = runner.invoke(
        app, ["converge", "--n-list", "100,400,1600", "--replications", "2", "--out", str(tmp_path)]
    )

    assert result.exit_code == 0, result.output
    assert "slope: -0.500" in result.output
    assert json.loads((tmp_path / "convergence.json").read_text(encoding="utf-8"))["slope_defined"] is True


def test_converge_rejects_decreasing_sizes(monkeypatch):
    _quiet_env(monkeypatch)
    result = runner.invoke(app, ["converge", "--n-list", "400,100"])
    assert result.exit_code == 3
    assert "invalid_input" in result.output
