"""End-to-end command-line behaviour through main()."""

import json
import os

import numpy as np
import pytest

from goodhart import make_m22
from goodhart.cli import main
from goodhart.envs import M22_R0, M22_R1

MICRO_CONFIG = {
    "environments": [{"kind": "gridworld", "n": 2}],
    "reward_kinds": {"gridworld": ["terminal"]},
    "gammas": [0.9],
    "sigmas": [0.0],
    "pressures": {"kind": "linspace", "low": 0.05, "high": 0.95, "count": 5},
    "proxies_per_run": 2,
    "seed": 3,
}


@pytest.fixture()
def micro_config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(MICRO_CONFIG))
    return str(path)


@pytest.fixture()
def m22_files(tmp_path):
    mdp_path = tmp_path / "mdp.json"
    mdp_path.write_text(make_m22().mdp.to_json())
    r0 = tmp_path / "r0.json"
    r0.write_text(M22_R0.to_json())
    r1 = tmp_path / "r1.json"
    r1.write_text(M22_R1.to_json())
    return str(mdp_path), str(r0), str(r1)


def test_sweep_without_out_is_config_error(micro_config_path, capsys):
    code = main(["prevalence", "--config", micro_config_path])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_prevalence_sweep_writes_artifacts(micro_config_path, tmp_path, capsys):
    out = str(tmp_path / "run")
    code = main(["prevalence", "--config", micro_config_path, "--out", out])
    assert code == 0
    assert "prevalence" in capsys.readouterr().out
    for name in ("runs.csv", "config.json", "manifest.json"):
        assert os.path.exists(os.path.join(out, name))
    written = json.loads(open(os.path.join(out, "config.json")).read())
    assert "jobs" not in written and "out" not in written


def test_sweep_reports_failures_with_exit_three(tmp_path, capsys):
    config = dict(MICRO_CONFIG, sigmas=[1.0])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config))
    out = str(tmp_path / "run")
    code = main(["prevalence", "--config", str(path), "--out", out])
    assert code == 3
    assert "failed" in capsys.readouterr().out


def test_early_stop_sweep_runs(micro_config_path, tmp_path):
    out = str(tmp_path / "run")
    code = main(
        ["early-stop", "--config", micro_config_path, "--out", out, "--method", "br"]
    )
    assert code == 0
    rows = open(os.path.join(out, "runs.csv")).read().splitlines()
    assert len(rows) == 3
    assert rows[1].split(",")[1] == "early-stop"


def test_sweep_bytes_identical_across_jobs(micro_config_path, tmp_path):
    config2 = dict(MICRO_CONFIG, environments=MICRO_CONFIG["environments"] + [
        {"kind": "gridworld", "n": 3}
    ])
    path = tmp_path / "c2.json"
    path.write_text(json.dumps(config2))
    out1, out2 = str(tmp_path / "j1"), str(tmp_path / "j2")
    assert main(["prevalence", "--config", str(path), "--out", out1, "--jobs", "1"]) == 0
    assert main(["prevalence", "--config", str(path), "--out", out2, "--jobs", "2"]) == 0
    for name in ("runs.csv", "config.json", "manifest.json"):
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b


def test_demo_m22_command(tmp_path, capsys):
    out = str(tmp_path / "demo")
    code = main(["demo-m22", "--out", out])
    assert code == 0
    text = capsys.readouterr().out
    assert "demo-m22-0000-000" in text and "ndh=" in text
    assert os.path.exists(os.path.join(out, "curves", "demo-m22-0000-002.csv"))


def test_solve_command_boltzmann(m22_files, capsys):
    mdp_path, r0, _ = m22_files
    code = main(["solve", "--mdp", mdp_path, "--reward", r0, "--pressure", "0.5"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["method"] == "mce" and payload["pressure"] == 0.5
    probs = np.array(payload["policy"])
    assert probs.shape == (2, 2)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_solve_command_ascent_and_out_file(m22_files, tmp_path):
    mdp_path, r0, _ = m22_files
    out = tmp_path / "sol.json"
    code = main(
        ["solve", "--mdp", mdp_path, "--reward", r0, "--method", "ascent", "--out", str(out)]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["pressure"] is None
    assert payload["return"] > 0.0


def test_solve_rejects_bad_pressure(m22_files, capsys):
    mdp_path, r0, _ = m22_files
    code = main(["solve", "--mdp", mdp_path, "--reward", r0, "--pressure", "1.5"])
    assert code == 2
    assert "pressure" in capsys.readouterr().err


def test_solve_missing_file_is_config_error(m22_files, tmp_path, capsys):
    mdp_path, _, _ = m22_files
    code = main(["solve", "--mdp", mdp_path, "--reward", str(tmp_path / "nope.json")])
    assert code == 2


def test_angle_command(m22_files, capsys):
    mdp_path, r0, r1 = m22_files
    code = main(["angle", "--mdp", mdp_path, "--reward-a", r0, "--reward-b", r1])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 < payload["angle"] < np.pi / 2
    assert np.isclose(payload["cosine"], np.cos(payload["angle"]))


def test_angle_self_is_zero(m22_files, capsys):
    mdp_path, r0, _ = m22_files
    code = main(["angle", "--mdp", mdp_path, "--reward-a", r0, "--reward-b", r0])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["angle"]) < 1e-6
