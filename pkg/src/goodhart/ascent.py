"""Steepest ascent over the occupancy polytope and certified early stopping.

The central objects are ascent paths ``eta_{i+1} = eta_i + lam_i t_i`` where
``t_i`` maximises the projected-reward gain over the cone of feasible
directions.  A step with unit gain below ``sin(theta) * norm(M r)`` admits a
hidden reward within angle ``theta`` of ``r`` that strictly decreases along
it; stopping before the first such step therefore protects every reward in
the cone.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import ConfigError, SolverFailureError, ValidationError
from .geometry import PolytopeModel, enumerate_vertices, sample_reward_at_angle
from .mdp import (
    OccupancyMeasure,
    Policy,
    RewardVector,
    TabularMdp,
    occupancy_measure,
    policy_from_occupancy,
    uniform_policy,
)

GAIN_MONOTONE_TOL = 1e-9
ZERO_TANGENT_TOL = 1e-9
RATIO_TOL = 1e-12
STOP_SLACK = 1e-12
DIAMETER_ENUM_LIMIT = 3000


class StopReason(enum.Enum):
    OPTIMUM = "OPTIMUM"
    EARLY_STOP = "EARLY_STOP"
    MAX_STEPS = "MAX_STEPS"


@dataclass(frozen=True)
class AscentPath:
    """A polyline of occupancy measures produced by steepest ascent.

    Attributes:
        points: Measures ``eta_0 .. eta_n``; consecutive points differ.
        directions: Unit tangents, one per segment.
        step_gains: ``t_i . (M r)`` per segment; non-increasing within 1e-9.
        stop_reason: Why the walk ended.
    """

    points: list
    directions: list
    step_gains: np.ndarray
    stop_reason: StopReason

    def __post_init__(self):
        gains = np.asarray(self.step_gains, dtype=float).ravel()
        gains.setflags(write=False)
        object.__setattr__(self, "step_gains", gains)
        if not self.points:
            raise ValidationError("path needs at least one point")
        steps = len(self.points) - 1
        if len(self.directions) != steps or gains.size != steps:
            raise ValidationError("directions and step_gains must match the step count")
        for a, b in zip(self.points, self.points[1:]):
            if np.array_equal(a, b):
                raise ValidationError("consecutive path points coincide")
        if gains.size > 1 and np.any(np.diff(gains) > GAIN_MONOTONE_TOL):
            raise ValidationError("step gains increase beyond 1e-9")

    @property
    def num_steps(self) -> int:
        return len(self.points) - 1

    @property
    def final(self) -> np.ndarray:
        return self.points[-1]


@dataclass(frozen=True)
class EarlyStopConfig:
    """Settings for certified early stopping.

    Attributes:
        angle_bound: Misspecification budget ``theta`` in [0, pi / 2].
        max_steps: Ascent step budget.
        feasibility_tol: Slack allowed when clipping tiny negatives.
    """

    angle_bound: float = 0.0
    max_steps: int = 1000
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if not (0.0 <= self.angle_bound <= np.pi / 2.0):
            raise ConfigError("angle_bound must lie in [0, pi / 2]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")


def default_active_tol(mdp: TabularMdp) -> float:
    # Scale-aware face detection: total mass is 1 / (1 - discount).
    return 1e-9 / (1.0 - mdp.discount)


def _cone_projection(
    poly: PolytopeModel, goal: np.ndarray, active: np.ndarray
) -> np.ndarray:
    """Projects ``goal`` onto ``{v : A v = 0, v_i >= 0 for active i}``.

    By Moreau decomposition against the polar cone the projection equals
    ``M (goal + E beta)``, where ``M`` is the nullspace projector, ``E``
    stacks indicators of the active coordinates, and ``beta >= 0`` minimises
    ``norm(M (goal + E beta))``.  That subproblem is plain nonnegative least
    squares, which Lawson-Hanson solves in finitely many steps.
    """
    base = poly.project(goal)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return base
    basis = np.zeros((idx.size, goal.size))
    basis[np.arange(idx.size), idx] = 1.0
    design = poly.project(basis).T
    try:
        beta, _ = nnls(design, -base, maxiter=30 * max(design.shape))
    except RuntimeError as exc:
        raise SolverFailureError(f"cone projection did not converge: {exc}") from exc
    v = base + design @ beta
    v[active] = np.maximum(v[active], 0.0)
    return v


def tangent_direction(
    poly: PolytopeModel,
    eta: np.ndarray,
    r: RewardVector,
    active_tol: float | None = None,
) -> np.ndarray:
    """Best feasible unit direction at ``eta`` for the projected reward.

    Maximises ``t . (M r)`` over the cone of tangents at ``eta``, where a
    coordinate is treated as at its bound when ``eta(s, a) <= active_tol``.

    Args:
        poly: Polytope of the target MDP.
        eta: Feasible measure (flat vector).
        r: Reward defining the ascent objective.
        active_tol: Face-detection tolerance; defaults to
            ``1e-9 / (1 - discount)``.

    Returns:
        A unit vector, or the zero vector exactly when ``eta`` maximises the
        reward over the polytope.
    """
    if active_tol is None:
        active_tol = default_active_tol(poly.mdp)
    eta = np.asarray(eta, dtype=float).ravel()
    goal = poly.projected(r)
    active = eta <= active_tol
    v = _cone_projection(poly, goal, active)
    norm = np.linalg.norm(v)
    if norm <= ZERO_TANGENT_TOL * max(np.linalg.norm(goal), 1e-300):
        return np.zeros_like(v)
    return v / norm


def _max_step(eta: np.ndarray, t: np.ndarray) -> float:
    shrinking = t < -RATIO_TOL
    if not np.any(shrinking):
        raise SolverFailureError("tangent has no shrinking coordinate; unbounded step")
    return float(np.min(eta[shrinking] / -t[shrinking]))


def stop_bound_value(proj_norm: float, theta: float) -> float:
    """Unit-gain threshold below which a step is unsafe under the angle budget.

    A hair of slack is added on the halting side so that a first step exactly
    parallel to the projected reward still halts at ``theta = pi / 2``.
    """
    return np.sin(theta) * proj_norm + STOP_SLACK * proj_norm


def first_unsafe_step(poly: PolytopeModel, r: RewardVector, path: AscentPath, theta: float):
    """Index of the first step violating the stopping criterion, or None."""
    bound = stop_bound_value(np.linalg.norm(poly.projected(r)), theta)
    for i, gain in enumerate(path.step_gains):
        if gain < bound:
            return i
    return None


def truncate_path(path: AscentPath, steps: int, reason: StopReason) -> AscentPath:
    """Prefix of a path with the given number of steps and a new stop reason."""
    if steps >= path.num_steps:
        return path
    return AscentPath(
        path.points[: steps + 1],
        path.directions[:steps],
        path.step_gains[:steps],
        reason,
    )


def _walk(
    poly: PolytopeModel,
    r: RewardVector,
    theta: float | None,
    max_steps: int,
    feasibility_tol: float,
    start: np.ndarray | None = None,
) -> AscentPath:
    mdp = poly.mdp
    if start is None:
        eta = occupancy_measure(mdp, uniform_policy(mdp)).values.copy()
    else:
        eta = np.asarray(start, dtype=float).copy()
    proj_norm = np.linalg.norm(poly.projected(r))
    bound = None if theta is None else stop_bound_value(proj_norm, theta)
    points = [eta.copy()]
    directions: list = []
    gains: list = []
    reason = StopReason.MAX_STEPS
    for _ in range(max_steps):
        t = tangent_direction(poly, eta, r)
        if not np.any(t):
            reason = StopReason.OPTIMUM
            break
        gain = float(t @ poly.projected(r))
        if bound is not None and gain < bound:
            reason = StopReason.EARLY_STOP
            break
        lam = _max_step(eta, t)
        eta = eta + lam * t
        if eta.min() < -feasibility_tol:
            raise SolverFailureError(f"step left the polytope by {eta.min():.3g}")
        np.clip(eta, 0.0, None, out=eta)
        points.append(eta.copy())
        directions.append(t)
        gains.append(gain)
    else:
        reason = StopReason.MAX_STEPS
    return AscentPath(points, directions, np.array(gains), reason)


def steepest_ascent(
    mdp: TabularMdp,
    poly: PolytopeModel,
    r: RewardVector,
    cfg: EarlyStopConfig = EarlyStopConfig(),
) -> AscentPath:
    """Exact steepest ascent from the uniform policy's measure to an optimum.

    Each step moves along the best cone direction as far as the polytope
    allows (exact ratio test).  Terminates when no improving direction
    remains or the step budget runs out.
    """
    return _walk(poly, r, None, cfg.max_steps, cfg.feasibility_tol)


def early_stopping(
    mdp: TabularMdp,
    poly: PolytopeModel,
    r: RewardVector,
    cfg: EarlyStopConfig,
) -> tuple[Policy, AscentPath]:
    """Steepest ascent that halts before any step unsafe under the angle budget.

    A step of unit gain below ``sin(angle_bound) * norm(M r)`` admits a reward
    within ``angle_bound`` of ``r`` that decreases along it; the walk stops
    just before the first such step, so every reward in the cone is monotone
    non-decreasing along the retained path.

    Returns:
        The policy of the last retained point and the retained path.
    """
    path = _walk(poly, r, cfg.angle_bound, cfg.max_steps, cfg.feasibility_tol)
    policy = policy_from_occupancy(poly.mdp, OccupancyMeasure(path.final))
    return policy, path


def stopping_certificate(
    poly: PolytopeModel,
    eta_a: np.ndarray,
    eta_b: np.ndarray,
    r: RewardVector,
    theta: float,
) -> bool:
    """Whether a hidden-reward witness exists for the step from ``eta_a`` to ``eta_b``.

    True iff ``r . (eta_b - eta_a) / norm(eta_b - eta_a) < sin(theta) * norm(M r)``,
    which holds exactly when some reward within angle ``theta`` of ``r``
    strictly decreases along the step.

    Raises:
        ValidationError: If the points coincide.
    """
    d = np.asarray(eta_b, dtype=float) - np.asarray(eta_a, dtype=float)
    norm = np.linalg.norm(d)
    if norm <= 1e-12:
        raise ValidationError("step endpoints coincide")
    gain = float(r.values @ d) / norm
    return gain < np.sin(theta) * np.linalg.norm(poly.projected(r))


def worst_case_value(
    poly: PolytopeModel, proxy: RewardVector, theta: float, eta: np.ndarray
) -> float:
    """Exact worst return of ``eta`` over rewards within ``theta`` of the proxy.

    The adversary picks any reward in the polytope span with projection norm
    equal to the proxy's and angle at most ``theta`` from it; the minimum is
    ``m * norm(M eta) * cos(min(phi + theta, pi))`` where ``phi`` is the angle
    between the projected measure and the projected proxy.
    """
    u = poly.projected(proxy)
    m = np.linalg.norm(u)
    h = poly.project(np.asarray(eta, dtype=float))
    norm_h = np.linalg.norm(h)
    if norm_h <= 1e-300:
        return 0.0
    cos_phi = np.clip(h @ u / (norm_h * m), -1.0, 1.0)
    phi = np.arccos(cos_phi)
    return float(m * norm_h * np.cos(min(phi + theta, np.pi)))


def _worst_ray(
    poly: PolytopeModel, proxy: RewardVector, theta: float, eta: np.ndarray
) -> np.ndarray:
    """The cone reward attaining ``worst_case_value`` at ``eta``."""
    u = poly.projected(proxy)
    m = np.linalg.norm(u)
    u_hat = u / m
    h = poly.project(np.asarray(eta, dtype=float))
    along = h @ u_hat
    w = h - along * u_hat
    norm_w = np.linalg.norm(w)
    if norm_w <= 1e-12 * max(np.linalg.norm(h), 1.0):
        w_hat = sample_reward_at_angle(poly, proxy, np.pi / 2.0, 1.0, seed=7).values
    else:
        w_hat = w / norm_w
    phi = np.arctan2(norm_w, along)
    if phi + theta >= np.pi:
        return -m * h / np.linalg.norm(h)
    return m * (np.cos(theta) * u_hat - np.sin(theta) * w_hat)


def _best_vertex_for(mdp: TabularMdp, direction: np.ndarray) -> np.ndarray:
    """Occupancy measure maximising a linear objective, via tight value iteration."""
    from .solvers import exact_config, value_iteration

    result = value_iteration(mdp, RewardVector(direction), exact_config())
    return occupancy_measure(mdp, result.policy).values


def maximize_worst_case(
    mdp: TabularMdp,
    poly: PolytopeModel,
    proxy: RewardVector,
    theta: float,
    num_rays: int = 64,
    seed: int = 0,
) -> Policy:
    """Policy maximising the worst return over rewards within ``theta`` of the proxy.

    Solves ``max_eta min_j eta . R_j`` as a linear program over a cone-boundary
    discretisation (``num_rays`` rewards sampled at angle exactly ``theta``
    from the proxy), then refines with cuts and line searches driven by the
    exact concave objective until the upper and lower bounds meet.

    Args:
        mdp: The environment.
        poly: Its polytope.
        proxy: Proxy reward defining the cone axis.
        theta: Cone half-angle, strictly below pi / 2.
        num_rays: Size of the initial boundary discretisation.
        seed: Seed for ray sampling.

    Raises:
        ConfigError: If ``theta >= pi / 2``.
        SolverFailureError: If the linear program fails.
    """
    if not (0.0 <= theta < np.pi / 2.0):
        raise ConfigError("theta must lie in [0, pi / 2)")
    u = poly.projected(proxy)
    m = np.linalg.norm(u)
    if theta == 0.0:
        eta = _best_vertex_for(mdp, u)
        return policy_from_occupancy(mdp, OccupancyMeasure(eta))
    rays = [u.copy()]
    for j in range(num_rays):
        ray = sample_reward_at_angle(poly, proxy, theta, m, seed=seed * 100003 + j)
        rays.append(ray.values)

    n = mdp.num_pairs
    a_eq = np.hstack([poly.a_matrix, np.zeros((poly.a_matrix.shape[0], 1))])
    b_eq = poly.rhs
    bounds = [(0.0, None)] * n + [(None, None)]
    c = np.zeros(n + 1)
    c[-1] = -1.0

    best_eta = None
    best_value = -np.inf
    for _ in range(40):
        a_ub = np.array([np.concatenate([-ray, [1.0]]) for ray in rays])
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(rays)), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if not res.success:
            raise SolverFailureError(f"worst-case LP failed: {res.message}")
        eta_k = np.clip(res.x[:n], 0.0, None)
        upper = -res.fun
        value = worst_case_value(poly, proxy, theta, eta_k)
        if value > best_value:
            best_value, best_eta = value, eta_k
        if upper - best_value <= 1e-9 * max(1.0, abs(upper)):
            break
        rays.append(_worst_ray(poly, proxy, theta, eta_k))

    # Supergradient polish: move toward the vertex best for the active worst ray.
    for _ in range(20):
        ray = _worst_ray(poly, proxy, theta, best_eta)
        vertex = _best_vertex_for(mdp, ray)
        ts = np.linspace(0.0, 1.0, 41)
        vals = [
            worst_case_value(poly, proxy, theta, (1 - t) * best_eta + t * vertex)
            for t in ts
        ]
        k = int(np.argmax(vals))
        if vals[k] <= best_value + 1e-12 * max(1.0, abs(best_value)):
            break
        best_value = vals[k]
        best_eta = (1 - ts[k]) * best_eta + ts[k] * vertex
    return policy_from_occupancy(mdp, OccupancyMeasure(best_eta))


def polytope_diameter(poly: PolytopeModel) -> float:
    """Maximal distance between occupancy measures, exact when enumerable.

    Enumerates deterministic policies when there are at most 3000 of them,
    otherwise falls back to the bound ``2 / (1 - discount)``.
    """
    mdp = poly.mdp
    if mdp.num_actions**mdp.num_states <= DIAMETER_ENUM_LIMIT:
        _, measures = enumerate_vertices(mdp)
        sq = np.einsum("ij,ij->i", measures, measures)
        gram = measures @ measures.T
        d2 = sq[:, None] + sq[None, :] - 2.0 * gram
        return float(np.sqrt(max(d2.max(), 0.0)))
    return 2.0 / (1.0 - mdp.discount)


def regret_bound(
    poly: PolytopeModel, path: AscentPath, theta: float, gamma: float
) -> float:
    """Upper bound on the true-reward regret of stopping at the path's end.

    For unit-projected-norm rewards within angle ``theta`` of the proxy, the
    regret of the final point is at most
    ``diameter - norm(eta_n - eta_0) * cos(theta)``.

    Raises:
        ValidationError: If the path is empty.
    """
    if not path.points:
        raise ValidationError("empty path")
    return regret_bound_points(poly, path.points[0], path.final, theta)


def regret_bound_points(
    poly: PolytopeModel, eta_first: np.ndarray, eta_last: np.ndarray, theta: float
) -> float:
    """Regret bound from the endpoints of any retained trajectory."""
    travelled = np.linalg.norm(np.asarray(eta_last) - np.asarray(eta_first))
    return polytope_diameter(poly) - travelled * np.cos(theta)


@dataclass(frozen=True)
class ImprovementConfig:
    """Budget for oracle-assisted iterative improvement."""

    max_oracle_calls: int = 50
    max_steps: int = 1000
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if self.max_oracle_calls < 1:
            raise ConfigError("max_oracle_calls must be at least 1")


@dataclass(frozen=True)
class ImprovementResult:
    """Outcome of iterative improvement.

    ``converged`` is False when the oracle budget ran out; the fields then
    describe the best partial result.
    """

    policy: Policy
    final_eta: np.ndarray
    oracle_calls: int
    converged: bool
    thetas: list
    segments: list


def iterative_improvement(
    mdp: TabularMdp,
    poly: PolytopeModel,
    oracle: Callable[[int], tuple],
    cfg: ImprovementConfig = ImprovementConfig(),
) -> ImprovementResult:
    """Alternates certified ascent with oracle refinements of the proxy reward.

    The oracle maps a round index to a pair ``(reward, theta)`` whose angle
    budget must cover the remaining misspecification and shrink over rounds.
    Ascent runs under each budget until the safety criterion fires, then the
    oracle supplies a sharper reward; the walk ends at a full optimum of the
    last reward.

    Returns:
        The final policy plus diagnostics; ``converged`` is False if the
        oracle budget was exhausted while the criterion kept firing.
    """
    eta = occupancy_measure(mdp, uniform_policy(mdp)).values.copy()
    segments: list = []
    thetas: list = []
    calls = 0
    converged = False
    while calls < cfg.max_oracle_calls:
        reward, theta = oracle(calls)
        calls += 1
        thetas.append(float(theta))
        path = _walk(poly, reward, float(theta), cfg.max_steps, cfg.feasibility_tol, start=eta)
        segments.append(path)
        eta = path.final.copy()
        if path.stop_reason is StopReason.OPTIMUM:
            converged = True
            break
    policy = policy_from_occupancy(mdp, OccupancyMeasure(eta))
    return ImprovementResult(policy, eta, calls, converged, thetas, segments)


def path_summary(
    poly: PolytopeModel, r: RewardVector, path: AscentPath, theta: float | None = None
) -> dict:
    """JSON-ready summary of a path: stop reason, steps, final return, criteria."""
    out = {
        "stop_reason": path.stop_reason.value,
        "steps": path.num_steps,
        "final_return": float(path.final @ r.values),
        "criterion_values": [float(g) for g in path.step_gains],
    }
    if theta is not None:
        out["stop_bound"] = float(np.sin(theta) * np.linalg.norm(poly.projected(r)))
    return out


def write_path_csv(path: AscentPath, csv_path):
    """Writes path points as CSV with a step column followed by measure entries."""
    width = path.points[0].size
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"eta_{i}" for i in range(width)])
        for i, point in enumerate(path.points):
            writer.writerow([i] + [repr(float(x)) for x in point])
