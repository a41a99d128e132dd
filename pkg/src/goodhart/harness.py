"""Configuration-driven experiment runner for the proxy-reward sweeps.

Three protocols are provided: a prevalence sweep over environment grids with
interpolated proxy ladders, a per-distance protocol with proxies sampled at
exact projected angles, and an early-stopping evaluation that applies the
angle criterion to the solver's own trajectory.  All runs are deterministic
given the master seed, independent of the parallelism degree, and export to
a fixed CSV layout.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .ascent import (
    EarlyStopConfig,
    polytope_diameter,
    steepest_ascent,
    stop_bound_value,
)
from .envs import EnvSpec, M22_R0, M22_R1, M22_R2, make_m22, sample_reward, sparsify, interpolate
from .errors import ConfigError, GoodhartError, ValidationError
from .geometry import build_polytope, normalize_return_range, projected_angle, sample_reward_at_angle
from .metrics import MetricsReport, compute_metrics
from .mdp import RewardVector
from .solvers import (
    BR,
    MCE,
    PressureSchedule,
    SolverConfig,
    TrainingCurve,
    pressure_grid,
    read_curve_csv,
    training_curve,
    write_curve_csv,
)

ASCENT = "ascent"
METHODS = (MCE, BR, ASCENT)
PROTOCOLS = ("prevalence", "distance", "early-stop", "demo-m22")

# Reward samplers used by default for each environment family.
FAMILY_REWARD_KINDS = {
    "gridworld": ("terminal", "path"),
    "cliff": ("cliff",),
    "random": ("terminal",),
    "tree": ("terminal",),
}

# Fixed runs.csv column order; documented in the README.
RUNS_COLUMNS = (
    "run_id",
    "protocol",
    "config_fingerprint",
    "family",
    "env",
    "discount",
    "sigma",
    "reward_kind",
    "t",
    "distance",
    "method",
    "theta",
    "cell_seed",
    "status",
    "reason",
    "ndh",
    "si",
    "cacw",
    "lr",
    "rwi",
    "lambda_star",
    "stop_index",
    "retained_return",
    "retained_ndh",
    "lost_fraction",
    "regret_bound",
)

# NDH above this level counts as a Goodhart event; below is solver noise.
GOODHART_NDH_TOL = 1e-6

# Trajectory steps shorter than this (times 1 / (1 - discount)) are treated
# as no movement and never trigger the stopping criterion.
STEP_NORM_TOL = 1e-14


def derive_seed(master_seed: int, key: str) -> int:
    """Stable 63-bit seed for a named stream under a master seed."""
    digest = hashlib.sha256(f"{master_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class Cell:
    """One grid cell: an environment at a discount with a sampler and sparsity."""

    index: int
    env_spec: EnvSpec
    reward_kind: str
    sigma: float

    @property
    def key(self) -> str:
        body = {
            "env": self.env_spec.to_dict(),
            "kind": self.reward_kind,
            "sigma": self.sigma,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full parameterisation of a sweep.

    Attributes:
        environments: Base environment specs (discount left unset).
        reward_kinds: Map from environment family to sampler names.
        gammas: Discount grid.
        sigmas: Sparsity grid.
        pressures: Pressure schedule spec; ``{"kind": "two_segment"}``,
            ``{"kind": "linspace", "low", "high", "count"}`` or
            ``{"kind": "explicit", "values"}``.
        proxies_per_run: Number of proxies per cell (ladder length).
        distances: Explicit projected angles for the distance protocol.
        method: ``"mce"``, ``"br"`` or ``"ascent"``.
        theta: Fixed stopping angle; None derives it per proxy.
        vi_threshold: Solver accuracy.
        max_iterations: Solver iteration budget.
        seed: Master seed; all per-cell streams derive from it.
        jobs: Parallelism degree over cells.
        out: Default export directory.
    """

    environments: tuple = ()
    reward_kinds: dict = field(default_factory=lambda: dict(FAMILY_REWARD_KINDS))
    gammas: tuple = (0.7, 0.9)
    sigmas: tuple = (0.1, 0.5, 0.9)
    pressures: dict = field(default_factory=lambda: {"kind": "two_segment"})
    proxies_per_run: int = 10
    distances: tuple | None = None
    method: str = MCE
    theta: float | None = None
    vi_threshold: float = 1e-3
    max_iterations: int = 10**5
    max_steps: int = 1000
    seed: int = 0
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "environments", tuple(self.environments))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if self.distances is not None:
            object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        kinds = {k: tuple(v) for k, v in self.reward_kinds.items()}
        object.__setattr__(self, "reward_kinds", kinds)
        if not self.environments:
            raise ConfigError("environment grid is empty")
        if not self.gammas or not self.sigmas:
            raise ConfigError("discount and sparsity grids must be non-empty")
        if self.proxies_per_run < 1:
            raise ConfigError("proxies_per_run must be at least 1")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        for g in self.gammas:
            if not (0.0 <= g < 1.0):
                raise ConfigError("discounts must lie in [0, 1)")
        for s in self.sigmas:
            if not (0.0 <= s <= 1.0):
                raise ConfigError("sparsities must lie in [0, 1]")
        if self.distances is not None:
            for d in self.distances:
                if not (0.0 < d < math.pi):
                    raise ConfigError("distances must lie strictly inside (0, pi)")
        for env in self.environments:
            if env.kind not in kinds:
                raise ConfigError(f"no reward kinds configured for family {env.kind!r}")
        self.schedule()

    def schedule(self) -> PressureSchedule:
        spec = self.pressures
        kind = spec.get("kind", "two_segment")
        if kind == "two_segment":
            return pressure_grid(
                low_count=int(spec.get("low_count", 7)),
                low_range=tuple(spec.get("low_range", (0.01, 0.75))),
                high_count=int(spec.get("high_count", 20)),
                high_range=tuple(spec.get("high_range", (0.8, 0.99))),
            )
        if kind == "linspace":
            return PressureSchedule.linspace(
                float(spec["low"]), float(spec["high"]), int(spec["count"])
            )
        if kind == "explicit":
            return PressureSchedule(np.asarray(spec["values"], dtype=float))
        raise ConfigError(f"unknown pressure schedule kind {kind!r}")

    def solver_config(self) -> SolverConfig:
        method = self.method if self.method in (MCE, BR) else MCE
        return SolverConfig(
            vi_threshold=self.vi_threshold,
            max_iterations=self.max_iterations,
            method=method,
        )

    def cells(self) -> list:
        out = []
        for env in self.environments:
            for kind in self.reward_kinds[env.kind]:
                for gamma in self.gammas:
                    for sigma in self.sigmas:
                        out.append(Cell(len(out), env.with_discount(gamma), kind, sigma))
        return out

    def to_dict(self) -> dict:
        return {
            "environments": [env.to_dict() for env in self.environments],
            "reward_kinds": {k: list(v) for k, v in sorted(self.reward_kinds.items())},
            "gammas": list(self.gammas),
            "sigmas": list(self.sigmas),
            "pressures": dict(self.pressures),
            "proxies_per_run": self.proxies_per_run,
            "distances": None if self.distances is None else list(self.distances),
            "method": self.method,
            "theta": self.theta,
            "vi_threshold": self.vi_threshold,
            "max_iterations": self.max_iterations,
            "max_steps": self.max_steps,
            "seed": self.seed,
            "jobs": self.jobs,
            "out": self.out,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        envs = tuple(EnvSpec.from_dict(d) for d in data.pop("environments"))
        kinds = data.pop("reward_kinds", None)
        kwargs = {}
        for name in (
            "gammas",
            "sigmas",
            "pressures",
            "proxies_per_run",
            "distances",
            "method",
            "theta",
            "vi_threshold",
            "max_iterations",
            "max_steps",
            "seed",
            "jobs",
            "out",
        ):
            if name in data:
                kwargs[name] = data[name]
        if kinds is not None:
            kwargs["reward_kinds"] = {k: tuple(v) for k, v in kinds.items()}
        return ExperimentConfig(environments=envs, **kwargs)

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(data)


# Parallelism degree and output location do not change what a sweep computes,
# so they never enter a dataset's provenance or its fingerprint.
EXECUTION_KEYS = ("jobs", "out")


def semantic_config(config_data: dict) -> dict:
    """Config dict with execution-only keys removed."""
    return {k: v for k, v in config_data.items() if k not in EXECUTION_KEYS}


def config_fingerprint(config_data: dict) -> str:
    """Short stable hash of a canonically serialised config.

    Execution-only keys (``jobs``, ``out``) are ignored, so reruns of the
    same sweep at different parallelism fingerprint identically.
    """
    canon = json.dumps(semantic_config(config_data), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def desk_prevalence(seed: int = 0, **overrides) -> ExperimentConfig:
    """Desk-scale prevalence grid covering all four environment families."""
    envs = []
    for n in range(2, 7):
        envs.append(EnvSpec("gridworld", {"n": n}))
    for n in range(2, 6):
        envs.append(EnvSpec("cliff", {"n": n, "p": 0.5}))
    for num_states in (4, 8, 16, 32):
        for num_actions in (2, 3):
            envs.append(
                EnvSpec(
                    "random",
                    {"num_states": num_states, "num_actions": num_actions, "num_terminal": 2},
                )
            )
    for depth in range(2, 6):
        for variant in ("first", "alternating"):
            envs.append(EnvSpec("tree", {"branching": 2, "depth": depth, "variant": variant}))
    cfg = ExperimentConfig(environments=tuple(envs), method=MCE, seed=seed)
    return replace(cfg, **overrides) if overrides else cfg


def desk_eval(seed: int = 0, **overrides) -> ExperimentConfig:
    """Desk-scale early-stopping evaluation grid (Boltzmann trajectories)."""
    envs = [EnvSpec("gridworld", {"n": n}) for n in (3, 4, 5)]
    envs += [EnvSpec("cliff", {"n": n, "p": 0.5}) for n in (4, 6, 8)]
    envs += [
        EnvSpec("random", {"num_states": 8, "num_actions": 2, "num_terminal": 2}),
        EnvSpec("random", {"num_states": 16, "num_actions": 3, "num_terminal": 2}),
    ]
    envs += [
        EnvSpec("tree", {"branching": 2, "depth": d, "variant": "first"}) for d in (3, 4)
    ]
    # sigma <= 0.5 keeps the hazard structure of cliff rewards at desk-scale
    # state counts; heavier sparsification zeroes most of the penalty band.
    cfg = ExperimentConfig(
        environments=tuple(envs), sigmas=(0.1, 0.3, 0.5), method=BR, seed=seed
    )
    return replace(cfg, **overrides) if overrides else cfg


def desk_distance(seed: int = 0, **overrides) -> ExperimentConfig:
    """Small per-distance protocol grid with an explicit angle ladder."""
    envs = (
        EnvSpec("gridworld", {"n": 3}),
        EnvSpec("random", {"num_states": 8, "num_actions": 2, "num_terminal": 2}),
    )
    cfg = ExperimentConfig(
        environments=envs,
        gammas=(0.9,),
        sigmas=(0.0,),
        distances=(0.05, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5),
        method=MCE,
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class RunRecord:
    """One experiment run: provenance fields, curve, metrics, stop outputs.

    ``curve`` and ``extras`` are carried in memory and in the per-run curve
    files; everything else lands in ``runs.csv``.
    """

    run_id: str
    protocol: str
    config_fingerprint: str
    family: str
    env: dict
    discount: float
    sigma: float
    reward_kind: str
    t: float | None = None
    distance: float | None = None
    method: str = MCE
    theta: float | None = None
    cell_seed: int = 0
    status: str = "ok"
    reason: str = ""
    metrics: MetricsReport | None = None
    stop_index: int | None = None
    retained_return: float | None = None
    retained_ndh: float | None = None
    lost_fraction: float | None = None
    regret_bound: float | None = None
    curve: TrainingCurve | None = None
    extras: dict | None = None

    def row(self) -> list:
        m = self.metrics
        return [
            self.run_id,
            self.protocol,
            self.config_fingerprint,
            self.family,
            json.dumps(self.env, sort_keys=True, separators=(",", ":")),
            repr(float(self.discount)),
            repr(float(self.sigma)),
            self.reward_kind,
            _fmt(self.t),
            _fmt(self.distance),
            self.method,
            _fmt(self.theta),
            str(self.cell_seed),
            self.status,
            self.reason,
            _fmt(None if m is None else m.ndh),
            _fmt(None if m is None else m.si),
            _fmt(None if m is None else m.cacw),
            _fmt(None if m is None else m.lr),
            _fmt(None if m is None else m.rwi),
            _fmt(None if m is None else m.lambda_star),
            "" if self.stop_index is None else str(self.stop_index),
            _fmt(self.retained_return),
            _fmt(self.retained_ndh),
            _fmt(self.lost_fraction),
            _fmt(self.regret_bound),
        ]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


@dataclass(frozen=True)
class Dataset:
    """A protocol's records plus the config they came from."""

    protocol: str
    config_data: dict
    records: tuple

    @property
    def num_failed(self) -> int:
        return sum(1 for r in self.records if r.status == "failed")

    def ok_records(self) -> list:
        return [r for r in self.records if r.status == "ok"]


def _cell_true_reward(config: ExperimentConfig, cell: Cell, env):
    seed_r = derive_seed(config.seed, f"{cell.key}:r0")
    seed_sp = derive_seed(config.seed, f"{cell.key}:sparsify0")
    return sparsify(sample_reward(env, cell.reward_kind, seed_r), cell.sigma, seed_sp)


def _cell_second_reward(config: ExperimentConfig, cell: Cell, env):
    seed_r = derive_seed(config.seed, f"{cell.key}:r1")
    seed_sp = derive_seed(config.seed, f"{cell.key}:sparsify1")
    return sparsify(sample_reward(env, cell.reward_kind, seed_r), cell.sigma, seed_sp)


def _record_stub(protocol: str, run_id: str, config, cell: Cell, cell_seed: int) -> dict:
    return {
        "run_id": run_id,
        "protocol": protocol,
        "config_fingerprint": config_fingerprint(config.to_dict()),
        "family": cell.env_spec.kind,
        "env": cell.env_spec.to_dict(),
        "discount": cell.env_spec.discount,
        "sigma": cell.sigma,
        "reward_kind": cell.reward_kind,
        "method": config.method,
        "cell_seed": cell_seed,
    }


def _failure(stub: dict, exc: Exception) -> RunRecord:
    return RunRecord(**stub, status="failed", reason=f"{type(exc).__name__}: {exc}")


def _prevalence_cell(config: ExperimentConfig, cell: Cell) -> list:
    env = cell.env_spec.build()
    poly = build_polytope(env.mdp)
    schedule = config.schedule()
    scfg = config.solver_config()
    cell_seed = derive_seed(config.seed, cell.key)
    true = _cell_true_reward(config, cell, env)
    second = _cell_second_reward(config, cell, env)
    t_values = np.linspace(0.0, 1.0, config.proxies_per_run)
    records = []
    baseline = None
    for j, t in enumerate(t_values):
        stub = _record_stub("prevalence", f"prevalence-{cell.index:04d}-{j:03d}", config, cell, cell_seed)
        try:
            proxy = interpolate(true, second, float(t))
            angle = projected_angle(poly, true, proxy)
            curve = training_curve(poly, true, proxy, schedule, scfg, track_angles=True)
            if j == 0:
                baseline = curve
            report = compute_metrics(curve, baseline)
            records.append(
                RunRecord(**stub, t=float(t), distance=angle, metrics=report, curve=curve)
            )
        except GoodhartError as exc:
            records.append(_failure({**stub, "t": float(t)}, exc))
    return records


def _distance_cell(config: ExperimentConfig, cell: Cell) -> list:
    env = cell.env_spec.build()
    poly = build_polytope(env.mdp)
    schedule = config.schedule()
    scfg = config.solver_config()
    cell_seed = derive_seed(config.seed, cell.key)
    true = _cell_true_reward(config, cell, env)
    try:
        baseline = training_curve(poly, true, true, schedule, scfg, track_angles=True)
    except GoodhartError:
        baseline = None
    records = []
    for di, d in enumerate(config.distances):
        for j in range(config.proxies_per_run):
            item = di * config.proxies_per_run + j
            stub = _record_stub(
                "distance", f"distance-{cell.index:04d}-{item:03d}", config, cell, cell_seed
            )
            try:
                seed_p = derive_seed(config.seed, f"{cell.key}:d{di}:p{j}")
                proxy = sample_reward_at_angle(poly, true, float(d), seed=seed_p)
                curve = training_curve(poly, true, proxy, schedule, scfg, track_angles=True)
                report = compute_metrics(curve, baseline)
                records.append(
                    RunRecord(**stub, distance=float(d), metrics=report, curve=curve)
                )
            except GoodhartError as exc:
                records.append(_failure({**stub, "distance": float(d)}, exc))
    return records


def _eval_cell(config: ExperimentConfig, cell: Cell) -> list:
    env = cell.env_spec.build()
    poly = build_polytope(env.mdp)
    schedule = config.schedule()
    scfg = config.solver_config()
    cell_seed = derive_seed(config.seed, cell.key)
    true = _cell_true_reward(config, cell, env)
    second = _cell_second_reward(config, cell, env)
    t_values = np.linspace(0.0, 1.0, config.proxies_per_run)
    diameter = polytope_diameter(poly)
    step_tol = STEP_NORM_TOL / (1.0 - env.mdp.discount)
    records = []
    baseline = None
    for j, t in enumerate(t_values):
        stub = _record_stub("early-stop", f"early-stop-{cell.index:04d}-{j:03d}", config, cell, cell_seed)
        stub["t"] = float(t)
        try:
            proxy = interpolate(true, second, float(t))
            angle = projected_angle(poly, true, proxy)
            stub["distance"] = angle
            theta = angle if config.theta is None else float(config.theta)
            # Beyond pi/2 the unit-gain bound is unattainable, so the rule
            # retains nothing; clamping keeps such records in the dataset.
            theta_rule = min(theta, math.pi / 2.0)
            stub["theta"] = theta
            true_norm, _ = normalize_return_range(poly, true)
            proxy_norm, _ = normalize_return_range(poly, proxy)
            goal = poly.projected(proxy_norm)
            if config.method == ASCENT:
                path = steepest_ascent(
                    env.mdp, poly, proxy_norm, EarlyStopConfig(max_steps=config.max_steps)
                )
                points = np.asarray(path.points)
                gains = np.asarray(path.step_gains, dtype=float)
                n_pts = points.shape[0]
                pseudo = (np.arange(n_pts) + 1.0) / (n_pts + 1.0)
                curve = TrainingCurve(
                    pseudo,
                    points @ true_norm.values,
                    points @ proxy_norm.values,
                    {
                        "method": ASCENT,
                        "pseudo_pressures": True,
                        "num_pressures": int(n_pts),
                    },
                    points,
                )
            else:
                curve = training_curve(poly, true, proxy, schedule, scfg, track_angles=True)
                points = curve.measures
                steps = np.diff(points, axis=0)
                norms = np.linalg.norm(steps, axis=1)
                gains = np.full(norms.shape, np.inf)
                moving = norms > step_tol
                gains[moving] = (steps[moving] @ goal) / norms[moving]
            if j == 0:
                baseline = curve
            # Ascent paths have per-run grids, so the baseline comparison
            # behind rwi is undefined there.
            report = compute_metrics(curve, None if config.method == ASCENT else baseline)
            bound = stop_bound_value(float(np.linalg.norm(goal)), theta_rule)
            unsafe = np.flatnonzero(gains < bound)
            stop = int(unsafe[0]) if unsafe.size else gains.size
            retained = points[: stop + 1]
            true_vals = points @ true_norm.values
            retained_vals = true_vals[: stop + 1]
            retained_return = float(retained_vals[-1])
            retained_ndh = float(retained_vals.max() - retained_return)
            lost = float(true_vals.max() - retained_return)
            regret = float(
                diameter - np.linalg.norm(retained[-1] - retained[0]) * np.cos(theta_rule)
            )
            records.append(
                RunRecord(
                    **stub,
                    metrics=report,
                    stop_index=stop,
                    retained_return=retained_return,
                    retained_ndh=retained_ndh,
                    lost_fraction=lost,
                    regret_bound=regret,
                    curve=curve,
                    extras={
                        "retained_measures": retained,
                        "proxy_norm": proxy_norm.values,
                        "true_norm": true_norm.values,
                        "full_true_values": true_vals,
                        "gains": gains,
                        "bound": bound,
                    },
                )
            )
        except GoodhartError as exc:
            records.append(_failure(stub, exc))
    return records


_CELL_RUNNERS = {
    "prevalence": _prevalence_cell,
    "distance": _distance_cell,
    "early-stop": _eval_cell,
}


def _cell_worker(args):
    protocol, config_data, index = args
    config = ExperimentConfig.from_dict(config_data)
    cell = config.cells()[index]
    return _CELL_RUNNERS[protocol](config, cell)


def _run_protocol(config: ExperimentConfig, protocol: str) -> Dataset:
    cells = config.cells()
    jobs = max(1, int(config.jobs))
    runner = _CELL_RUNNERS[protocol]
    if jobs == 1 or len(cells) <= 1:
        batches = [runner(config, cell) for cell in cells]
    else:
        payload = [(protocol, config.to_dict(), cell.index) for cell in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_cell_worker, payload, chunksize=1))
    records = [rec for batch in batches for rec in batch]
    records.sort(key=lambda r: r.run_id)
    return Dataset(protocol, semantic_config(config.to_dict()), tuple(records))


def run_prevalence(config: ExperimentConfig) -> Dataset:
    """Proxy-ladder sweep over the grid; metrics for every (cell, t) pair."""
    return _run_protocol(config, "prevalence")


def run_distance_protocol(config: ExperimentConfig) -> Dataset:
    """Proxies sampled at exact projected angles from the true reward.

    Raises:
        ConfigError: If the config carries no distance grid.
    """
    if config.distances is None or not config.distances:
        raise ConfigError("distance protocol needs a non-empty distances grid")
    return _run_protocol(config, "distance")


def run_early_stopping_eval(config: ExperimentConfig) -> Dataset:
    """Applies the angle stopping criterion to each proxy's solver trajectory.

    The stopping angle defaults to the measured projected angle between true
    and proxy; beyond ``pi / 2`` the retention bound is unattainable and the
    rule keeps nothing, so such runs stop at the first point.  Each record
    stores the stop index, retained return, drop height of the retained
    prefix, lost-reward fraction against the unconstrained trajectory, and
    the travel-based regret bound.
    """
    return _run_protocol(config, "early-stop")


def run_demo_m22(seed: int = 0, method: str = MCE) -> Dataset:
    """End-to-end curves for the two-state example with its three fixed rewards."""
    env = make_m22()
    poly = build_polytope(env.mdp)
    schedule = PressureSchedule.linspace(0.01, 0.99, 30)
    scfg = SolverConfig(vi_threshold=1e-4, method=method)
    config_data = {
        "protocol": "demo-m22",
        "method": method,
        "seed": seed,
        "vi_threshold": 1e-4,
        "pressures": {"kind": "linspace", "low": 0.01, "high": 0.99, "count": 30},
    }
    fingerprint = config_fingerprint(config_data)
    true = M22_R0
    records = []
    baseline = None
    for j, proxy in enumerate((M22_R0, M22_R1, M22_R2)):
        run_id = f"demo-m22-0000-{j:03d}"
        angle = projected_angle(poly, true, proxy)
        curve = training_curve(poly, true, proxy, schedule, scfg, track_angles=True)
        if j == 0:
            baseline = curve
        report = compute_metrics(curve, baseline)
        records.append(
            RunRecord(
                run_id=run_id,
                protocol="demo-m22",
                config_fingerprint=fingerprint,
                family="m22",
                env={"kind": "m22"},
                discount=env.mdp.discount,
                sigma=0.0,
                reward_kind="fixed",
                t=float(j) / 2.0,
                distance=angle,
                method=method,
                cell_seed=seed,
                metrics=report,
                curve=curve,
            )
        )
    return Dataset("demo-m22", config_data, tuple(records))


def _validate_record(record: RunRecord):
    if record.status != "ok":
        return
    if record.curve is not None:
        TrainingCurve(
            record.curve.pressures,
            record.curve.true_returns,
            record.curve.proxy_returns,
            record.curve.metadata,
        )
    m = record.metrics
    if m is not None:
        for name in ("ndh", "si", "cacw", "lr", "lambda_star"):
            if not math.isfinite(getattr(m, name)):
                raise ValidationError(f"{record.run_id}: metric {name} is not finite")


def export(dataset: Dataset, out_dir) -> None:
    """Writes runs.csv, per-run curve files, config echo and manifest.

    Every ok record is re-validated on write.  Output is byte-stable: floats
    use ``repr``, JSON keys are sorted, and no timestamps are recorded.

    Raises:
        ValidationError: If a record fails its invariants.
        GoodhartError: On I/O failure, with the path in the message.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        curves_dir = os.path.join(out_dir, "curves")
        os.makedirs(curves_dir, exist_ok=True)
        records = sorted(dataset.records, key=lambda r: r.run_id)
        for record in records:
            _validate_record(record)
        with open(os.path.join(out_dir, "runs.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RUNS_COLUMNS)
            for record in records:
                writer.writerow(record.row())
        for record in records:
            if record.curve is None:
                continue
            write_curve_csv(
                record.curve,
                os.path.join(curves_dir, f"{record.run_id}.csv"),
                os.path.join(curves_dir, f"{record.run_id}.json"),
            )
        with open(os.path.join(out_dir, "config.json"), "w") as fh:
            json.dump(dataset.config_data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest = {
            "protocol": dataset.protocol,
            "master_seed": dataset.config_data.get("seed"),
            "config_fingerprint": config_fingerprint(dataset.config_data),
            "version": _package_version(),
            "columns": list(RUNS_COLUMNS),
            "num_records": len(records),
            "num_failed": dataset.num_failed,
        }
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise GoodhartError(f"export to {out_dir} failed: {exc}") from exc


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("goodhart")
    except Exception:
        return "0.0.0"


def _parse_opt(value: str):
    return None if value == "" else float(value)


def import_dataset(out_dir) -> Dataset:
    """Reads an exported dataset back; numeric fields round-trip exactly."""
    try:
        with open(os.path.join(out_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        with open(os.path.join(out_dir, "config.json")) as fh:
            config_data = json.load(fh)
        records = []
        with open(os.path.join(out_dir, "runs.csv"), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if list(header) != list(RUNS_COLUMNS):
                raise ValidationError(f"unexpected runs.csv header in {out_dir}")
            for row in reader:
                d = dict(zip(RUNS_COLUMNS, row))
                curve = None
                curve_path = os.path.join(out_dir, "curves", f"{d['run_id']}.csv")
                if os.path.exists(curve_path):
                    sidecar = os.path.join(out_dir, "curves", f"{d['run_id']}.json")
                    curve = read_curve_csv(
                        curve_path, sidecar if os.path.exists(sidecar) else None
                    )
                metrics = None
                if d["ndh"] != "":
                    metrics = MetricsReport(
                        ndh=float(d["ndh"]),
                        si=float(d["si"]),
                        cacw=float(d["cacw"]),
                        lr=float(d["lr"]),
                        rwi=_parse_opt(d["rwi"]),
                        lambda_star=float(d["lambda_star"]),
                    )
                records.append(
                    RunRecord(
                        run_id=d["run_id"],
                        protocol=d["protocol"],
                        config_fingerprint=d["config_fingerprint"],
                        family=d["family"],
                        env=json.loads(d["env"]),
                        discount=float(d["discount"]),
                        sigma=float(d["sigma"]),
                        reward_kind=d["reward_kind"],
                        t=_parse_opt(d["t"]),
                        distance=_parse_opt(d["distance"]),
                        method=d["method"],
                        theta=_parse_opt(d["theta"]),
                        cell_seed=int(d["cell_seed"]),
                        status=d["status"],
                        reason=d["reason"],
                        metrics=metrics,
                        stop_index=None if d["stop_index"] == "" else int(d["stop_index"]),
                        retained_return=_parse_opt(d["retained_return"]),
                        retained_ndh=_parse_opt(d["retained_ndh"]),
                        lost_fraction=_parse_opt(d["lost_fraction"]),
                        regret_bound=_parse_opt(d["regret_bound"]),
                        curve=curve,
                    )
                )
        return Dataset(manifest["protocol"], config_data, tuple(records))
    except OSError as exc:
        raise GoodhartError(f"import from {out_dir} failed: {exc}") from exc


def goodhart_fraction(dataset: Dataset, tol: float = GOODHART_NDH_TOL) -> float:
    """Fraction of ok records whose curve NDH exceeds the noise floor."""
    oks = dataset.ok_records()
    if not oks:
        raise ValidationError("no successful records")
    hits = sum(1 for r in oks if r.metrics.ndh > tol)
    return hits / len(oks)


def fraction_by_distance(dataset: Dataset, num_buckets: int = 8) -> tuple:
    """Goodhart fraction per projected-distance bucket.

    Buckets are equal-width over the observed distance range; empty buckets
    are dropped.

    Returns:
        (bucket centers, fractions, counts) as arrays.
    """
    oks = [r for r in dataset.ok_records() if r.distance is not None]
    if not oks:
        raise ValidationError("no successful records with a distance")
    dist = np.array([r.distance for r in oks])
    hit = np.array([r.metrics.ndh > GOODHART_NDH_TOL for r in oks], dtype=float)
    edges = np.linspace(dist.min(), dist.max() + 1e-12, num_buckets + 1)
    idx = np.clip(np.digitize(dist, edges) - 1, 0, num_buckets - 1)
    centers, fractions, counts = [], [], []
    for b in range(num_buckets):
        mask = idx == b
        if not np.any(mask):
            continue
        centers.append(0.5 * (edges[b] + edges[b + 1]))
        fractions.append(float(hit[mask].mean()))
        counts.append(int(mask.sum()))
    return np.array(centers), np.array(fractions), np.array(counts)


def averaged_distance_curves(dataset: Dataset) -> dict:
    """Mean true/proxy curves per distance over the ok records.

    Returns:
        Map from distance to a TrainingCurve of per-pressure means.
    """
    groups: dict = {}
    for record in dataset.ok_records():
        groups.setdefault(record.distance, []).append(record.curve)
    out = {}
    for d, curves in sorted(groups.items()):
        pressures = curves[0].pressures
        true_mean = np.mean([c.true_returns for c in curves], axis=0)
        proxy_mean = np.mean([c.proxy_returns for c in curves], axis=0)
        out[d] = TrainingCurve(
            pressures,
            true_mean,
            proxy_mean,
            {"distance": float(d), "num_curves": len(curves)},
        )
    return out


def mean_lost_fraction(dataset: Dataset, family: str | None = None) -> float:
    """Mean lost-reward fraction over ok records, optionally per family."""
    vals = [
        r.lost_fraction
        for r in dataset.ok_records()
        if r.lost_fraction is not None and (family is None or r.family == family)
    ]
    if not vals:
        raise ValidationError(f"no lost-reward records for family {family!r}")
    return float(np.mean(vals))
