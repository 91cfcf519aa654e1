import csv
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from dpdonc.cli import main
from dpdonc.experiment import (
    PRESETS,
    TRAJECTORY_COLUMNS,
    ConfigError,
    ExperimentConfig,
    build_run_config,
    preset,
    run_experiment,
)


@pytest.mark.parametrize("name", PRESETS)
def test_config_round_trip(name):
    cfg = preset(name)
    assert ExperimentConfig.loads(cfg.dumps()) == cfg
    off = cfg.replace(eps=math.inf)
    assert ExperimentConfig.loads(off.dumps()) == off
    assert json.loads(off.dumps())["eps"] == "off"


def test_tracking_preset_values():
    cfg = preset("paper-s5")
    assert cfg.T == 500 and cfg.runs == 20
    rc = build_run_config(cfg)
    assert rc.n == 6 and rc.d == 2
    assert rc.alpha(1) == pytest.approx(1 / 6)
    assert rc.omega.kind == "l1_ball" and rc.omega.radius == 3
    assert rc.geometry.kind == "squared_euclidean"
    assert rc.x1.tolist() == [[0.0, 0.0]] * 6
    assert rc.problem.scenario.sensors.tolist() == [[0.8, 0.95]] * 6


def test_spread_preset_sensors():
    rc = build_run_config(preset("paper-s5-spread"))
    r = np.linalg.norm(rc.problem.scenario.sensors - [0.8, 0.95], axis=1)
    assert np.allclose(r, 2.0)


def test_smoke_preset_is_fast(tmp_path):
    cfg = preset("quadratic-smoke")
    rc = build_run_config(cfg)
    assert rc.n == 2 and cfg.T == 50 and cfg.runs == 5
    start = time.perf_counter()
    run_experiment(cfg, out=tmp_path)
    assert time.perf_counter() - start < 1.0


def test_unknown_preset_and_keys():
    with pytest.raises(ConfigError):
        preset("nope")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**preset("quadratic-smoke").to_dict(), "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**preset("quadratic-smoke").to_dict(), "eps": -1})


def test_output_schema(tmp_path):
    cfg = preset("quadratic-smoke")
    run_experiment(cfg, out=tmp_path)
    assert ExperimentConfig.loads((tmp_path / "config.json").read_text()) == cfg
    with open(tmp_path / "regret_trajectory.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    assert len(rows) == 1 + 50 * 2
    runs = sorted((tmp_path / "runs").iterdir())
    assert [p.name for p in runs] == [f"run_{k:03d}.csv" for k in range(5)]
    header = runs[0].read_text().splitlines()[0]
    assert header == "t,node,x1,x2"
    s = json.loads((tmp_path / "summary.json").read_text())
    assert set(s) >= {"seed", "config", "regret", "bounds", "accountant", "sublinear"}
    assert s["accountant"]["epsilon_total"] == pytest.approx(50 * 5.0)


def test_retained_columns(tmp_path):
    run_experiment(preset("quadratic-smoke").replace(retain=True, runs=1), out=tmp_path)
    header = (tmp_path / "runs" / "run_000.csv").read_text().splitlines()[0]
    assert header == "t,node,x1,x2,z1,z2,q1,q2"


def test_repeat_runs_identical_bytes(tmp_path):
    cfg = preset("quadratic-smoke")
    run_experiment(cfg, out=tmp_path / "a")
    run_experiment(cfg, out=tmp_path / "b", workers=2)
    for rel in ["regret_trajectory.csv", "runs/run_000.csv", "runs/run_004.csv", "summary.json"]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_cli_sweep(tmp_path, capsys):
    assert main(["--preset", "quadratic-smoke", "--eps", "1,off", "--out", str(tmp_path)]) == 0
    for sub in ("eps-1", "eps-off"):
        assert (tmp_path / sub / "regret_trajectory.csv").exists()
    s = json.loads((tmp_path / "eps-off" / "summary.json").read_text())
    assert s["accountant"]["noise"] == "off"
    assert "eps-1" in capsys.readouterr().out


def test_cli_geometry_sweep(tmp_path):
    code = main(["--preset", "quadratic-smoke", "--geometry", "squared_euclidean,mahalanobis",
                 "--runs", "2", "--T", "20", "--out", str(tmp_path)])
    assert code == 0
    cfg = json.loads((tmp_path / "geometry-mahalanobis" / "config.json").read_text())
    assert cfg["geometry"]["kind"] == "mahalanobis" and cfg["T"] == 20


def test_cli_config_file_and_env(tmp_path, monkeypatch):
    path = tmp_path / "exp.json"
    path.write_text(preset("quadratic-smoke").replace(runs=2).dumps())
    monkeypatch.setenv("DPDONC_OUT", str(tmp_path / "env-out"))
    assert main(["--config", str(path), "--no-noise"]) == 0
    s = json.loads((tmp_path / "env-out" / "summary.json").read_text())
    assert s["config"]["eps"] == "off" and s["regret"]["runs"] == 2


def test_cli_error_json(tmp_path, capsys):
    bad = preset("quadratic-smoke").to_dict()
    bad["schedule"]["matrices"] = [[[0.9, 0.5], [0.1, 0.5]]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code = main(["--config", str(path), "--out", str(tmp_path / "o")])
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and "doubly stochastic" in err["message"]
    assert json.loads((tmp_path / "o" / "error.json").read_text()) == err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "dpdonc", "--preset", "quadratic-smoke", "--runs", "1", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "summary.json").exists()
