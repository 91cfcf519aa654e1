"""Experiment configuration, presets, orchestration and output files.

Output layout of :func:`run_experiment` (all UTF-8, header rows, '.' decimal)::

    config.json               full config echo
    runs/run_<k>.csv          t,node,x1..xd[,z1..zd,q1..qd]
    regret_trajectory.csv     tau,node,regret_over_tau,stderr
    summary.json              regret, bounds, accountant, config, seed

Nodes are 0-based, time is 1-based.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bregman import BregmanGeometry
from .diagnostics import bound_report, sublinearity_check
from .engine import RunConfig, estimate_regret, run_monte_carlo
from .geometry import ConstraintSet
from .graph import WeightSchedule, tracking_matrices
from .problems import TARGET_START, LocalizationProblem, LocalizationScenario, QuadraticProblem

OUT_ENV = "DPDONC_OUT"
PRESETS = ("paper-s5", "paper-s5-spread", "quadratic-smoke")
TRAJECTORY_COLUMNS = ("tau", "node", "regret_over_tau", "stderr")


class ConfigError(ValueError):
    pass


def _eps_to_json(eps):
    return "off" if math.isinf(eps) else eps


def _eps_from_json(eps):
    if eps is None or eps == "off":
        return math.inf
    eps = float(eps)
    if not eps > 0:
        raise ConfigError(f"eps must be positive or 'off', got {eps}")
    return eps


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict
    schedule: dict
    constraint: dict
    geometry: dict
    eps: float = math.inf
    T: int = 500
    runs: int = 20
    seed: int = 0
    out: str | None = None
    checkpoint_every: int | None = None
    retain: bool = False
    preset: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eps"] = _eps_to_json(self.eps)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d["eps"] = _eps_from_json(d.get("eps", "off"))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _tracking_schedule() -> dict:
    return {"policy": "cyclic", "matrices": [m.tolist() for m in tracking_matrices()]}


def preset(name: str) -> ExperimentConfig:
    """Named configurations.

    ``paper-s5``: six co-located sensors at (0.8, 0.95), the three 6-node
    matrices cycled, l1 ball of radius 3, phi = ||x||^2/2, T = 500, 20 runs.
    ``paper-s5-spread``: same but sensors on a circle of radius 2 around the
    target start.  ``quadratic-smoke``: tiny convex problem for quick checks.
    """
    if name == "paper-s5" or name == "paper-s5-spread":
        if name == "paper-s5":
            sensors = [list(TARGET_START)] * 6
        else:
            ang = 2 * np.pi * np.arange(6) / 6
            sensors = (np.array(TARGET_START) + 2.0 * np.c_[np.cos(ang), np.sin(ang)]).tolist()
        return ExperimentConfig(
            problem={"kind": "localization", "sensors": sensors, "target_start": list(TARGET_START),
                     "noise_max": 1e-3, "scenario_seed": 0},
            schedule=_tracking_schedule(),
            constraint={"kind": "l1_ball", "dim": 2, "radius": 3.0},
            geometry={"kind": "squared_euclidean"},
            eps=5.0, T=500, runs=20, seed=0, preset=name,
        )
    if name == "quadratic-smoke":
        return ExperimentConfig(
            problem={"kind": "quadratic", "N": 2, "dim": 2, "spread": 1.0, "scenario_seed": 0},
            schedule={"policy": "cyclic", "matrices": [[[0.5, 0.5], [0.5, 0.5]]]},
            constraint={"kind": "box", "dim": 2, "lower": [-2.0, -2.0], "upper": [2.0, 2.0]},
            geometry={"kind": "squared_euclidean"},
            eps=5.0, T=50, runs=5, seed=0, preset=name,
        )
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")


def default_mahalanobis(d: int) -> dict:
    q = np.eye(d)
    q[0, 0] = 2.0
    return {"kind": "mahalanobis", "Q": q.tolist()}


def build_problem(cfg: ExperimentConfig, omega: ConstraintSet):
    p = cfg.problem
    kind = p.get("kind")
    if kind == "localization":
        sc = LocalizationScenario.generate(
            p["sensors"], cfg.T, seed=int(p.get("scenario_seed", 0)),
            x0=p.get("target_start", TARGET_START), noise_max=float(p.get("noise_max", 1e-3)),
        )
        return LocalizationProblem(sc, omega)
    if kind == "quadratic":
        return QuadraticProblem.generate(
            int(p["N"]), int(p["dim"]), cfg.T, omega, seed=int(p.get("scenario_seed", 0)),
            spread=float(p.get("spread", 1.0)),
        )
    raise ConfigError(f"unknown problem kind {kind!r}")


def build_schedule(spec: dict) -> WeightSchedule:
    return WeightSchedule(
        tuple(np.array(m, dtype=float) for m in spec["matrices"]),
        policy=spec.get("policy", "cyclic"),
        sequence=spec.get("sequence"),
        a=spec.get("a"),
    )


def build_run_config(cfg: ExperimentConfig) -> RunConfig:
    try:
        omega = ConstraintSet.from_dict(cfg.constraint)
        geom = BregmanGeometry.from_dict(cfg.geometry)
        problem = build_problem(cfg, omega)
        sched = build_schedule(cfg.schedule)
        return RunConfig(
            problem=problem, schedule=sched, omega=omega, geometry=geom, eps=cfg.eps, T=cfg.T,
            seed=cfg.seed, runs=cfg.runs, checkpoint_every=cfg.checkpoint_every, retain=cfg.retain,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _fmt(v) -> str:
    return repr(float(v))


def run_csv(record, with_z: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = record.d
    cols = ["t", "node"] + [f"x{k + 1}" for k in range(d)]
    if with_z:
        cols += [f"z{k + 1}" for k in range(d)] + [f"q{k + 1}" for k in range(d)]
    w.writerow(cols)
    for t in range(1, record.T + 1):
        for i in range(record.n):
            row = [t, i] + [_fmt(v) for v in record.X[t - 1, i]]
            if with_z:
                row += [_fmt(v) for v in record.Z[t - 1, i]] + [_fmt(v) for v in record.Qb[t - 1, i]]
            w.writerow(row)
    return buf.getvalue()


def trajectory_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    ratio, se = report.ratio, report.ratio_stderr
    for k, tau in enumerate(report.checkpoints):
        for i in range(ratio.shape[1]):
            w.writerow([int(tau), i, _fmt(ratio[k, i]), _fmt(se[k, i])])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


@dataclass
class ExperimentResult:
    run_config: RunConfig
    records: list
    report: object
    bounds: object
    summary: dict = field(default_factory=dict)


def execute(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run a configuration in memory (no files)."""
    rc = build_run_config(cfg)
    records = run_monte_carlo(rc, workers=workers)
    report = estimate_regret(records, rc.omega)
    taus = sorted({int(t) for t in (100, rc.T) if t in set(report.checkpoints.tolist())})
    bounds = bound_report(rc, report, taus=taus)
    acc = records[0].accountant
    try:
        sublinear = sublinearity_check(report)
    except ValueError:
        sublinear = None
    summary = {
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "problem": rc.problem.to_dict(),
        "regret": report.to_dict(),
        "max_regret_over_tau": {str(int(t)): float(v) for t, v in zip(report.checkpoints, report.max_ratio())},
        "sublinear": sublinear,
        "bounds": bounds.to_dict(),
        "accountant": (
            {"noise": "off", "epsilon_per_step": None, "epsilon_total": None}
            if acc is None
            else {"noise": "laplace", "epsilon_per_step": cfg.eps, **acc.to_dict()}
        ),
        "noise_scale": {"first": float(records[0].sigmas[0]), "last": float(records[0].sigmas[-1])},
    }
    return ExperimentResult(rc, records, report, bounds, _jsonable(summary))


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "dpdonc-out")


def write_outputs(result: ExperimentResult, cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs").mkdir(exist_ok=True)
    (out / "config.json").write_text(cfg.dumps() + "\n", encoding="utf-8")
    for rec in result.records:
        (out / "runs" / f"run_{rec.run:03d}.csv").write_text(run_csv(rec, cfg.retain), encoding="utf-8")
    (out / "regret_trajectory.csv").write_text(trajectory_csv(result.report), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_experiment(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentResult:
    """Execute a configuration and write every artifact under ``out``."""
    out = Path(out or cfg.out or default_out_dir())
    result = execute(cfg, workers=workers)
    write_outputs(result, cfg, out)
    return result
