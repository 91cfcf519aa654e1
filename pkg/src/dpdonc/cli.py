"""Command-line entry point.

    dpdonc --preset paper-s5 --eps 0.5,1,5,off --out results/eps-sweep
    dpdonc --preset paper-s5 --geometry squared_euclidean,mahalanobis --out results/geometry-sweep
    dpdonc --config my_experiment.json

A comma-separated ``--eps`` or ``--geometry`` runs a sweep, one
subdirectory per value (``eps-0.5``, ``geometry-mahalanobis``, ...).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

from .experiment import (
    PRESETS,
    ConfigError,
    ExperimentConfig,
    _eps_from_json,
    default_mahalanobis,
    default_out_dir,
    preset,
    run_experiment,
)

GEOMETRIES = ("squared_euclidean", "mahalanobis")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpdonc", description="Differentially private distributed online mirror descent simulator.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESETS, help="start from a named configuration")
    src.add_argument("--config", type=Path, help="JSON experiment configuration")
    p.add_argument("--eps", help="privacy level(s): number or 'off', comma-separated for a sweep")
    p.add_argument("--no-noise", action="store_true", help="same as --eps off")
    p.add_argument("--T", type=int, help="horizon")
    p.add_argument("--runs", type=int, help="Monte Carlo runs")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--geometry", help="Bregman generator(s), comma-separated for a sweep")
    p.add_argument("--out", type=Path, help=f"output directory (default ${'{'}DPDONC_OUT{'}'} or ./dpdonc-out)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo runs")
    p.add_argument("--retain", action="store_true", help="write consensus points and broadcasts to the run CSVs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _base_config(args) -> ExperimentConfig:
    if args.config is not None:
        return ExperimentConfig.loads(args.config.read_text(encoding="utf-8"))
    return preset(args.preset or "paper-s5")


def _geometry_spec(name: str, d: int) -> dict:
    if name == "mahalanobis":
        return default_mahalanobis(d)
    if name in ("squared_euclidean", "neg_entropy"):
        return {"kind": name}
    raise ConfigError(f"unknown geometry {name!r}")


def expand(args) -> list[tuple[str | None, ExperimentConfig]]:
    """Configurations to run, with their subdirectory names (None = no sweep)."""
    cfg = _base_config(args)
    overrides = {k: getattr(args, k) for k in ("T", "runs", "seed") if getattr(args, k) is not None}
    if args.retain:
        overrides["retain"] = True
    cfg = cfg.replace(**overrides)
    eps_values = ["off"] if args.no_noise else (args.eps.split(",") if args.eps else [None])
    geoms = args.geometry.split(",") if args.geometry else [None]
    d = int(cfg.constraint["dim"])
    jobs = []
    for e, g in itertools.product(eps_values, geoms):
        c = cfg
        parts = []
        if e is not None:
            c = c.replace(eps=_eps_from_json(e.strip()))
            parts.append(f"eps-{e.strip()}")
        if g is not None:
            c = c.replace(geometry=_geometry_spec(g.strip(), d))
            parts.append(f"geometry-{g.strip()}")
        sweep = len(eps_values) > 1 or len(geoms) > 1
        jobs.append(("_".join(parts) if sweep else None, c))
    return jobs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out) if args.out else Path(default_out_dir())
    try:
        jobs = expand(args)
        for sub, cfg in jobs:
            target = out / sub if sub else out
            result = run_experiment(cfg, out=target, workers=args.workers)
            s = result.summary
            print(f"{target}: max_i R_T/T = {s['regret']['final_max_regret_over_T']:.6g}, sublinear={s['sublinear']}")
    except (ConfigError, ValueError, RuntimeError, OSError, json.JSONDecodeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(err) + "\n", encoding="utf-8")
        except OSError:
            pass
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
