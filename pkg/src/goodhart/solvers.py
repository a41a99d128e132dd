"""Regularised policy solvers and pressure-indexed training curves.

Optimisation pressure is parameterised by ``lam`` in (0, 1) with rationality
coefficient ``alpha = -ln(lam)``: ``lam`` near 1 approaches the hard optimum,
``lam`` near 0 approaches indifference.  Two solver families are provided,
maximum-causal-entropy (soft value iteration) and Boltzmann rationality
(softmax over hard optimal Q-values).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import ConfigError, SolverFailureError, ValidationError
from .geometry import PolytopeModel, normalize_return_range
from .mdp import (
    OccupancyMeasure,
    Policy,
    RewardVector,
    TabularMdp,
    occupancy_measure,
)

MCE = "mce"
BR = "br"

# Threshold used when value iteration must pin down exact optimal policies.
EXACT_VI_THRESHOLD = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by the policy solvers.

    Attributes:
        vi_threshold: Target sup-norm accuracy of the converged value function.
        max_iterations: Iteration budget for any fixed-point loop.
        method: ``"mce"`` or ``"br"``.
    """

    vi_threshold: float = 1e-3
    max_iterations: int = 10**5
    method: str = MCE

    def __post_init__(self):
        if self.vi_threshold <= 0:
            raise ConfigError("vi_threshold must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.method not in (MCE, BR):
            raise ConfigError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class ValueIterationResult:
    q_values: np.ndarray
    state_values: np.ndarray
    policy: Policy
    iterations: int


def _backup(mdp: TabularMdp, reward_table: np.ndarray, values: np.ndarray) -> np.ndarray:
    return reward_table + mdp.discount * (mdp.transition @ values)


def _stop_delta(mdp: TabularMdp, threshold: float) -> float:
    # Successive-difference delta that guarantees sup-norm error <= threshold.
    if mdp.discount == 0.0:
        return threshold
    return threshold * (1.0 - mdp.discount) / mdp.discount


def value_iteration(
    mdp: TabularMdp,
    reward: RewardVector,
    cfg: SolverConfig = SolverConfig(),
) -> ValueIterationResult:
    """Hard value iteration with a sup-norm accuracy guarantee.

    Iterates the Bellman optimality backup until consecutive value functions
    differ by at most ``vi_threshold * (1 - discount) / discount``, which
    bounds both the distance to the optimal values and the Bellman residual
    by ``vi_threshold``.  The returned policy is greedy with lowest-index
    tie-breaking.

    Raises:
        SolverFailureError: If the iteration budget is exhausted first; the
            message carries the last residual bound.
    """
    table = reward.values.reshape(mdp.num_states, mdp.num_actions)
    values = np.zeros(mdp.num_states)
    stop = _stop_delta(mdp, cfg.vi_threshold)
    delta = np.inf
    for it in range(1, cfg.max_iterations + 1):
        q = _backup(mdp, table, values)
        new_values = q.max(axis=1)
        delta = np.abs(new_values - values).max()
        values = new_values
        if delta <= stop:
            greedy = np.argmax(q, axis=1)
            probs = np.zeros_like(table)
            probs[np.arange(mdp.num_states), greedy] = 1.0
            return ValueIterationResult(q, values, Policy(probs), it)
    raise SolverFailureError(
        f"value iteration: residual bound {delta:.3g} after {cfg.max_iterations} steps"
    )


def exact_config(max_iterations: int = 10**5) -> SolverConfig:
    """Solver settings tight enough to pin down exact optimal policies."""
    return SolverConfig(vi_threshold=EXACT_VI_THRESHOLD, max_iterations=max_iterations)


def extreme_returns(mdp: TabularMdp, reward: RewardVector) -> tuple[float, float]:
    """Exact minimal and maximal policy returns over all policies.

    Runs tight value iteration on the reward and its negation, then evaluates
    the greedy policies exactly through their occupancy measures.
    """
    from .mdp import policy_return

    cfg = exact_config()
    best = value_iteration(mdp, reward, cfg)
    worst = value_iteration(mdp, RewardVector(-reward.values), cfg)
    j_max = policy_return(mdp, reward, best.policy)
    j_min = policy_return(mdp, reward, worst.policy)
    return j_min, j_max


def mce_policy(
    mdp: TabularMdp, reward: RewardVector, alpha: float, cfg: SolverConfig = SolverConfig()
) -> Policy:
    """Maximum-causal-entropy policy at rationality ``alpha``.

    Runs soft value iteration ``V(s) = alpha * logsumexp(Q(s, .) / alpha)``
    until the usual contraction stopping rule, then returns the policy
    ``pi(s, a) = exp((Q(s, a) - V(s)) / alpha)``.

    Raises:
        SolverFailureError: If the iteration budget is exhausted first.
    """
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    table = reward.values.reshape(mdp.num_states, mdp.num_actions)
    q, values = _soft_vi(mdp, table, alpha, cfg, np.zeros(mdp.num_states))
    return _soft_policy(q, values, alpha)


def _soft_vi(
    mdp: TabularMdp, table: np.ndarray, alpha: float, cfg: SolverConfig, values: np.ndarray
) -> tuple:
    # The stopping rule keeps its sup-norm guarantee from any starting point,
    # so callers may warm-start from a neighbouring alpha.
    stop = _stop_delta(mdp, cfg.vi_threshold)
    for _ in range(cfg.max_iterations):
        q = _backup(mdp, table, values)
        new_values = alpha * logsumexp(q / alpha, axis=1)
        delta = np.abs(new_values - values).max()
        values = new_values
        if delta <= stop:
            return q, values
    raise SolverFailureError(f"soft value iteration did not converge in {cfg.max_iterations} steps")


def _soft_policy(q: np.ndarray, values: np.ndarray, alpha: float) -> Policy:
    probs = np.exp((q - values[:, None]) / alpha)
    probs /= probs.sum(axis=1, keepdims=True)
    return Policy(probs)


def boltzmann_policy(
    mdp: TabularMdp, reward: RewardVector, alpha: float, cfg: SolverConfig = SolverConfig()
) -> Policy:
    """Boltzmann-rational policy ``pi(s, a) proportional to exp(Q*(s, a) / alpha)``.

    ``Q*`` comes from hard value iteration at the configured threshold.
    """
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    result = value_iteration(mdp, reward, cfg)
    return Policy(softmax(result.q_values / alpha, axis=1))


def solve_policy(
    mdp: TabularMdp, reward: RewardVector, alpha: float, cfg: SolverConfig = SolverConfig()
) -> Policy:
    """Dispatches to the solver named by ``cfg.method``."""
    if cfg.method == MCE:
        return mce_policy(mdp, reward, alpha, cfg)
    return boltzmann_policy(mdp, reward, alpha, cfg)


@dataclass(frozen=True)
class PressureSchedule:
    """An increasing grid of pressure values ``lam`` in the open interval (0, 1)."""

    pressures: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pressures, dtype=float).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "pressures", arr)
        if arr.size == 0:
            raise ConfigError("pressure schedule is empty")
        if arr.min() <= 0.0 or arr.max() >= 1.0:
            raise ConfigError("pressures must lie strictly inside (0, 1)")
        if np.any(np.diff(arr) <= 0):
            raise ConfigError("pressures must be strictly increasing")

    @property
    def alphas(self) -> np.ndarray:
        return -np.log(self.pressures)

    def __len__(self) -> int:
        return int(self.pressures.size)

    @staticmethod
    def linspace(low: float, high: float, count: int) -> "PressureSchedule":
        return PressureSchedule(np.linspace(low, high, count))


def pressure_grid(
    low_count: int = 7,
    low_range: tuple = (0.01, 0.75),
    high_count: int = 20,
    high_range: tuple = (0.8, 0.99),
) -> PressureSchedule:
    """Default two-segment pressure grid, denser near the hard-optimisation end.

    The default yields 27 values: 7 equidistant on [0.01, 0.75] and 20
    equidistant on [0.8, 0.99].

    Raises:
        ConfigError: On empty grids or overlapping segments.
    """
    if low_count < 0 or high_count < 0 or low_count + high_count == 0:
        raise ConfigError("need a positive number of pressures")
    if low_count and high_count and low_range[1] >= high_range[0]:
        raise ConfigError("pressure segments overlap")
    parts = []
    if low_count:
        parts.append(np.linspace(low_range[0], low_range[1], low_count))
    if high_count:
        parts.append(np.linspace(high_range[0], high_range[1], high_count))
    values = np.concatenate(parts)
    return PressureSchedule(values)


RETURN_RANGE_TOL = 1e-6


@dataclass(frozen=True)
class TrainingCurve:
    """Normalised true and proxy returns along a pressure schedule.

    Attributes:
        pressures: The schedule's ``lam`` values.
        true_returns: Normalised returns under the true reward, in [0, 1]
            within 1e-6.
        proxy_returns: Normalised returns under the proxy reward.
        metadata: JSON-serialisable details of how the curve was produced.
        measures: Optional (num_pressures, num_pairs) array of the occupancy
            measures behind each point; kept in memory only, never exported.
    """

    pressures: np.ndarray
    true_returns: np.ndarray
    proxy_returns: np.ndarray
    metadata: dict = field(default_factory=dict)
    measures: np.ndarray | None = None

    def __post_init__(self):
        for name in ("pressures", "true_returns", "proxy_returns"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.pressures.size
        if self.true_returns.size != n or self.proxy_returns.size != n:
            raise ValidationError("curve arrays must have matching lengths")
        if self.measures is not None and self.measures.shape[0] != n:
            raise ValidationError("measures must have one row per pressure")
        for name in ("true_returns", "proxy_returns"):
            arr = getattr(self, name)
            if arr.size and (arr.min() < -RETURN_RANGE_TOL or arr.max() > 1.0 + RETURN_RANGE_TOL):
                raise ValidationError(f"{name} outside [0, 1] beyond 1e-6")


def training_curve(
    poly: PolytopeModel,
    true_reward: RewardVector,
    proxy_reward: RewardVector,
    schedule: PressureSchedule,
    cfg: SolverConfig = SolverConfig(),
    track_angles: bool = False,
) -> TrainingCurve:
    """Sweeps optimisation pressure against the proxy and scores both rewards.

    Both rewards are first affinely rescaled so their returns span [0, 1].
    For each pressure the configured solver optimises the rescaled proxy and
    the resulting policy's exact occupancy measure scores both rewards.

    Args:
        poly: Polytope of the target MDP.
        true_reward: Reward used for evaluation only.
        proxy_reward: Reward the solver optimises.
        schedule: Pressure grid.
        cfg: Solver settings.
        track_angles: When set, stores the per-pressure cosine between the
            projected step direction from the lowest-pressure measure and the
            projected proxy in ``metadata["cos_angle_track"]``.

    Returns:
        The training curve, pressures ascending.
    """
    mdp = poly.mdp
    true_norm, true_info = normalize_return_range(poly, true_reward)
    proxy_norm, proxy_info = normalize_return_range(poly, proxy_reward)
    n = len(schedule)
    true_returns = np.zeros(n)
    proxy_returns = np.zeros(n)
    etas = np.zeros((n, mdp.num_pairs))
    # One hard VI serves every Boltzmann temperature; soft VI warm-starts
    # from the neighbouring pressure.
    hard = value_iteration(mdp, proxy_norm, cfg) if cfg.method == BR else None
    table = proxy_norm.values.reshape(mdp.num_states, mdp.num_actions)
    soft_values = np.zeros(mdp.num_states)
    for i, alpha in enumerate(schedule.alphas):
        if hard is not None:
            pol = Policy(softmax(hard.q_values / alpha, axis=1))
        else:
            q, soft_values = _soft_vi(mdp, table, alpha, cfg, soft_values)
            pol = _soft_policy(q, soft_values, alpha)
        eta = occupancy_measure(mdp, pol).values
        etas[i] = eta
        true_returns[i] = eta @ true_norm.values
        proxy_returns[i] = eta @ proxy_norm.values
    metadata = {
        "method": cfg.method,
        "vi_threshold": cfg.vi_threshold,
        "num_pressures": n,
        "true_transform": true_info,
        "proxy_transform": proxy_info,
    }
    if track_angles:
        g = poly.projected(proxy_norm)
        g = g / max(np.linalg.norm(g), 1e-300)
        track = []
        for i in range(n):
            step = poly.project(etas[i] - etas[0])
            norm = np.linalg.norm(step)
            track.append(float(step @ g / norm) if norm > 1e-12 else 1.0)
        metadata["cos_angle_track"] = track
    return TrainingCurve(schedule.pressures, true_returns, proxy_returns, metadata, etas)


def write_curve_csv(curve: TrainingCurve, csv_path, sidecar_path=None):
    """Writes a curve as CSV (columns lambda, true_return, proxy_return).

    Floats are written with ``repr`` so the CSV round-trips bit-exactly.  When
    ``sidecar_path`` is given the metadata is written there as JSON.
    """
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "true_return", "proxy_return"])
        for lam, tr, pr in zip(curve.pressures, curve.true_returns, curve.proxy_returns):
            writer.writerow([repr(float(lam)), repr(float(tr)), repr(float(pr))])
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            json.dump(curve.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_curve_csv(csv_path, sidecar_path=None) -> TrainingCurve:
    """Reads a curve written by ``write_curve_csv``."""
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["lambda", "true_return", "proxy_return"]:
            raise ValidationError(f"unexpected curve header {header}")
        for row in reader:
            rows.append([float(x) for x in row])
    arr = np.array(rows) if rows else np.zeros((0, 3))
    metadata = {}
    if sidecar_path is not None:
        with open(sidecar_path) as fh:
            metadata = json.load(fh)
    return TrainingCurve(arr[:, 0], arr[:, 1], arr[:, 2], metadata)
