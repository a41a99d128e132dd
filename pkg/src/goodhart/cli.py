"""Command-line interface for the sweep protocols and one-off utilities.

Exit codes: 0 on success, 2 on configuration errors, 3 when a sweep finished
but some records failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from .ascent import EarlyStopConfig, steepest_ascent
from .errors import ConfigError, GoodhartError
from .geometry import build_polytope, projected_angle
from .harness import (
    ExperimentConfig,
    desk_distance,
    desk_eval,
    desk_prevalence,
    export,
    run_demo_m22,
    run_distance_protocol,
    run_early_stopping_eval,
    run_prevalence,
)
from .mdp import OccupancyMeasure, RewardVector, TabularMdp, policy_from_occupancy, policy_return
from .solvers import MCE, SolverConfig, solve_policy


def _common_flags(parser):
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--jobs", type=int, default=None, help="parallel cells")
    parser.add_argument(
        "--method", choices=("mce", "br", "ascent"), default=None, help="solver override"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goodhart", description="Proxy-reward sweeps, angle tools and early stopping."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("prevalence", "run the proxy-ladder prevalence sweep"),
        ("distance", "run the fixed-angle distance protocol"),
        ("early-stop", "run the early-stopping evaluation"),
        ("demo-m22", "reproduce the two-state worked example"),
    ):
        p = sub.add_parser(name, help=text)
        _common_flags(p)
    p = sub.add_parser("solve", help="solve one MDP for one reward")
    _common_flags(p)
    p.add_argument("--mdp", required=True, help="path to an MDP JSON file")
    p.add_argument("--reward", required=True, help="path to a reward JSON file")
    p.add_argument("--pressure", type=float, default=0.9, help="pressure lambda in (0, 1)")
    p = sub.add_parser("angle", help="projected angle between two rewards")
    _common_flags(p)
    p.add_argument("--mdp", required=True, help="path to an MDP JSON file")
    p.add_argument("--reward-a", required=True, help="path to the first reward JSON file")
    p.add_argument("--reward-b", required=True, help="path to the second reward JSON file")
    return parser


_DEFAULTS = {
    "prevalence": desk_prevalence,
    "distance": desk_distance,
    "early-stop": desk_eval,
}

_RUNNERS = {
    "prevalence": run_prevalence,
    "distance": run_distance_protocol,
    "early-stop": run_early_stopping_eval,
}


def _sweep_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = _DEFAULTS[args.command](seed=args.seed if args.seed is not None else 0)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.method is not None:
        overrides["method"] = args.method
    if args.out is not None:
        overrides["out"] = args.out
    return replace(config, **overrides) if overrides else config


def _cmd_sweep(args) -> int:
    config = _sweep_config(args)
    if config.out is None:
        raise ConfigError("no output directory; pass --out or set it in the config")
    dataset = _RUNNERS[args.command](config)
    export(dataset, config.out)
    print(
        f"{dataset.protocol}: {len(dataset.records)} records, "
        f"{dataset.num_failed} failed -> {config.out}"
    )
    return 3 if dataset.num_failed else 0


def _cmd_demo(args) -> int:
    dataset = run_demo_m22(
        seed=args.seed if args.seed is not None else 0,
        method=args.method if args.method in ("mce", "br") else MCE,
    )
    out = args.out if args.out is not None else "demo-m22-out"
    export(dataset, out)
    for record in dataset.records:
        print(f"{record.run_id}: ndh={record.metrics.ndh!r} angle={record.distance!r}")
    print(f"demo-m22: {len(dataset.records)} records -> {out}")
    return 0


def _read(path) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _cmd_solve(args) -> int:
    mdp = TabularMdp.from_json(_read(args.mdp))
    reward = RewardVector.from_json(_read(args.reward))
    method = args.method or MCE
    if method == "ascent":
        poly = build_polytope(mdp)
        path = steepest_ascent(mdp, poly, reward, EarlyStopConfig())
        policy = policy_from_occupancy(mdp, OccupancyMeasure(path.final))
        value = float(path.final @ reward.values)
    else:
        if not (0.0 < args.pressure < 1.0):
            raise ConfigError("pressure must lie strictly inside (0, 1)")
        alpha = -math.log(args.pressure)
        policy = solve_policy(mdp, reward, alpha, SolverConfig(method=method))
        value = policy_return(mdp, reward, policy)
    payload = {
        "method": method,
        "pressure": None if method == "ascent" else args.pressure,
        "return": value,
        "policy": policy.probs.tolist(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_angle(args) -> int:
    mdp = TabularMdp.from_json(_read(args.mdp))
    reward_a = RewardVector.from_json(_read(args.reward_a))
    reward_b = RewardVector.from_json(_read(args.reward_b))
    poly = build_polytope(mdp)
    angle = projected_angle(poly, reward_a, reward_b)
    payload = {"angle": angle, "cosine": float(np.cos(angle))}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _RUNNERS:
            return _cmd_sweep(args)
        if args.command == "demo-m22":
            return _cmd_demo(args)
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_angle(args)
    except GoodhartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
