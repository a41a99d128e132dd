"""Occupancy-polytope geometry: flow constraints, projection, and reward angles.

The feasible occupancy measures of an MDP form a polytope
``{eta >= 0 : A eta = mu}``.  Rewards that differ only outside the span of
that polytope induce the same ordering over policies, so all angular
comparisons here are made after orthogonally projecting rewards onto the span
of the constraint null space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRewardError, NoWitnessError, ValidationError
from .mdp import (
    OccupancyMeasure,
    Policy,
    RewardVector,
    TabularMdp,
    deterministic_policy,
    occupancy_measure,
)

DENSE_PROJECTION_LIMIT = 4096
ZERO_NORM_TOL = 1e-12
VERTEX_ENUM_LIMIT = 10**6


def constraint_matrix(mdp: TabularMdp) -> np.ndarray:
    """Bellman-flow constraint matrix ``A`` with ``A eta = initial_dist``.

    ``A[s', (s, a)] = 1[s' == s] - discount * transition[s, a, s']``.
    """
    s, a = mdp.num_states, mdp.num_actions
    mat = np.zeros((s, s * a))
    for state in range(s):
        mat[state, state * a : (state + 1) * a] = 1.0
    mat -= mdp.discount * mdp.transition.reshape(s * a, s).T
    return mat


@dataclass(frozen=True)
class WorstCaseSpec:
    """A cone of candidate rewards: angle budget around a proxy plus magnitude.

    Attributes:
        angle_bound: Half-angle of the cone, in [0, pi].
        magnitude: Required projected norm of rewards in the cone.
    """

    angle_bound: float
    magnitude: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.angle_bound <= np.pi):
            raise ValidationError("angle_bound must lie in [0, pi]")
        if not (0.0 < self.magnitude < np.inf):
            raise ValidationError("magnitude must be finite and positive")


@dataclass(frozen=True)
class PolytopeModel:
    """Constraint matrix, right-hand side, and projector for one MDP.

    Attributes:
        mdp: The environment the polytope belongs to.
        a_matrix: Flow constraint matrix of shape (S, S * A).
        rhs: Right-hand side (the initial distribution).
        dimension: Dimension of the polytope's affine span, ``S * (A - 1)``
            whenever the constraints have full row rank.
    """

    mdp: TabularMdp
    a_matrix: np.ndarray
    rhs: np.ndarray
    dimension: int
    _gram_pinv: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    _dense: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the linear span of measure differences.

        Accepts a flat vector or a stack of row vectors.
        """
        v = np.asarray(v, dtype=float)
        if self._dense is not None:
            return v @ self._dense.T if v.ndim > 1 else self._dense @ v
        correction = (v @ self.a_matrix.T) @ self._gram_pinv @ self.a_matrix
        return v - correction

    def projected(self, reward: RewardVector) -> np.ndarray:
        return self.project(reward.values)


def build_polytope(mdp: TabularMdp) -> PolytopeModel:
    """Builds the flow polytope and its orthogonal projector.

    The dense projection matrix is materialised only while
    ``S * A <= 4096``; larger instances apply the projector implicitly via
    ``v - A^T (A A^T)^+ (A v)``.
    """
    a_mat = constraint_matrix(mdp)
    gram = a_mat @ a_mat.T
    try:
        gram_pinv = np.linalg.pinv(gram, hermitian=True)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.norm(gram))
        raise ValidationError(f"projection factorisation failed (norm {cond:.3g})") from exc
    rank = np.linalg.matrix_rank(a_mat)
    dense = None
    if mdp.num_pairs <= DENSE_PROJECTION_LIMIT:
        dense = np.eye(mdp.num_pairs) - a_mat.T @ gram_pinv @ a_mat
    return PolytopeModel(
        mdp=mdp,
        a_matrix=a_mat,
        rhs=np.array(mdp.initial_dist),
        dimension=mdp.num_pairs - rank,
        _gram_pinv=gram_pinv,
        _dense=dense,
    )


def projected_angle(poly: PolytopeModel, r0: RewardVector, r1: RewardVector) -> float:
    """Angle in [0, pi] between the projections of two rewards.

    Zero exactly when the rewards induce the same policy ordering up to
    positive scaling and potential shaping.

    Raises:
        DegenerateRewardError: If either projection is (numerically) zero.
    """
    p0, p1 = poly.projected(r0), poly.projected(r1)
    n0, n1 = np.linalg.norm(p0), np.linalg.norm(p1)
    scale = max(np.linalg.norm(r0.values), np.linalg.norm(r1.values), 1.0)
    if n0 <= ZERO_NORM_TOL * scale or n1 <= ZERO_NORM_TOL * scale:
        raise DegenerateRewardError("reward projects to zero; angle undefined")
    cosine = np.clip(p0 @ p1 / (n0 * n1), -1.0, 1.0)
    return float(np.arccos(cosine))


def starc_normalize(poly: PolytopeModel, reward: RewardVector, m: float = 1.0) -> RewardVector:
    """Canonicalises a reward: projects it and rescales the projection to norm ``m``.

    Raises:
        DegenerateRewardError: If the projection is zero.
    """
    p = poly.projected(reward)
    norm = np.linalg.norm(p)
    if norm <= ZERO_NORM_TOL * max(1.0, np.linalg.norm(reward.values)):
        raise DegenerateRewardError("reward projects to zero; cannot normalise")
    return RewardVector(p * (m / norm))


def normalize_return_range(
    poly: PolytopeModel, reward: RewardVector
) -> tuple[RewardVector, dict]:
    """Affinely rescales a reward so the best return is 1 and the worst is 0.

    The extreme returns are found by value iteration on the reward and its
    negation, then evaluated exactly for the resulting greedy policies.

    Args:
        poly: Polytope of the target MDP.
        reward: Reward to rescale.

    Returns:
        The rescaled reward and a dict with keys ``scale``, ``shift``,
        ``min_return`` and ``max_return`` describing the affine map
        ``r' = scale * r + shift``.

    Raises:
        DegenerateRewardError: If every policy earns the same return.
    """
    from .solvers import extreme_returns

    mdp = poly.mdp
    j_min, j_max = extreme_returns(mdp, reward)
    span = j_max - j_min
    if span <= 1e-9 * max(1.0, abs(j_max), abs(j_min)):
        raise DegenerateRewardError("return range is empty; reward is constant on the polytope")
    scale = 1.0 / span
    # A constant c on every pair adds c / (1 - discount) to every return.
    shift = -j_min * scale * (1.0 - mdp.discount)
    out = RewardVector(scale * reward.values + shift)
    return out, {
        "scale": float(scale),
        "shift": float(shift),
        "min_return": float(j_min),
        "max_return": float(j_max),
    }


def sample_reward_at_angle(
    poly: PolytopeModel,
    base: RewardVector,
    angle: float,
    m: float = 1.0,
    seed: int = 0,
) -> RewardVector:
    """Samples a reward at an exact projected angle from a base reward.

    The result lies entirely in the span of the polytope (no null-space
    component) and has projection norm ``m``.

    Args:
        poly: Polytope of the target MDP.
        base: Direction-defining reward; must not project to zero.
        angle: Desired angle in [0, pi].
        m: Norm of the returned reward.
        seed: RNG seed for the perpendicular direction.

    Raises:
        DegenerateRewardError: If the base projects to zero or the span is
            one-dimensional so no perpendicular direction exists.
    """
    if not (0.0 <= angle <= np.pi):
        raise ValidationError(f"angle {angle} outside [0, pi]")
    u = poly.projected(base)
    norm_u = np.linalg.norm(u)
    if norm_u <= ZERO_NORM_TOL * max(1.0, np.linalg.norm(base.values)):
        raise DegenerateRewardError("base reward projects to zero")
    u = u / norm_u
    rng = np.random.default_rng(seed)
    for _ in range(100):
        w = poly.project(rng.standard_normal(poly.mdp.num_pairs))
        w -= (w @ u) * u
        norm_w = np.linalg.norm(w)
        if norm_w > 1e-9:
            perp = w / norm_w
            return RewardVector(m * (np.cos(angle) * u + np.sin(angle) * perp))
    raise DegenerateRewardError("span has no direction perpendicular to the base reward")


def adversarial_reward(
    poly: PolytopeModel,
    proxy: RewardVector,
    theta: float,
    eta_dir: np.ndarray,
) -> RewardVector:
    """A reward within ``theta`` of the proxy that strictly decreases along a direction.

    Args:
        poly: Polytope of the target MDP.
        proxy: Proxy reward defining the cone axis.
        theta: Cone half-angle in [0, pi / 2].
        eta_dir: Improvement direction in measure space (for example a step of
            an ascent path).

    Returns:
        A reward ``R`` with ``angle(R, proxy) = theta``, ``norm(M R) = norm(M proxy)``
        and ``R . eta_dir < 0``.

    Raises:
        NoWitnessError: If the angle between the proxy and the direction is at
            most ``pi / 2 - theta``, in which case no such reward exists.
    """
    u = poly.projected(proxy)
    norm_u = np.linalg.norm(u)
    if norm_u <= ZERO_NORM_TOL * max(1.0, np.linalg.norm(proxy.values)):
        raise DegenerateRewardError("proxy projects to zero")
    u_hat = u / norm_u
    h = poly.project(np.asarray(eta_dir, dtype=float))
    norm_h = np.linalg.norm(h)
    if norm_h <= ZERO_NORM_TOL:
        raise ValidationError("direction projects to zero")
    along = h @ u_hat
    w = h - along * u_hat
    norm_w = np.linalg.norm(w)
    phi = float(np.arctan2(norm_w, along))
    if phi <= np.pi / 2.0 - theta + 1e-12:
        raise NoWitnessError(
            f"direction at angle {phi:.6g} from proxy; need more than {np.pi / 2 - theta:.6g}"
        )
    if norm_w <= ZERO_NORM_TOL * norm_h:
        # Direction anti-parallel to the proxy; any perpendicular tilt works.
        w_hat = sample_reward_at_angle(poly, proxy, np.pi / 2.0, 1.0, seed=1).values
    else:
        w_hat = w / norm_w
    r = np.cos(theta) * u_hat - np.sin(theta) * w_hat
    return RewardVector(norm_u * r)


def potential_shaping(mdp: TabularMdp, phi: np.ndarray) -> RewardVector:
    """Potential-based shaping term ``F(s, a) = discount * E[phi(s')] - phi(s)``.

    Shaping terms lie in the null space of the polytope projection, so adding
    one to a reward never changes projected angles.
    """
    phi = np.asarray(phi, dtype=float)
    expected = mdp.transition @ phi
    table = mdp.discount * expected - phi[:, None]
    return RewardVector(table.ravel())


def enumerate_vertices(mdp: TabularMdp, poly: PolytopeModel | None = None) -> tuple[list, np.ndarray]:
    """All deterministic policies and their occupancy measures.

    Returns:
        A list of ``Policy`` objects and a matching array of measures with one
        row per policy.  Distinct policies can share a vertex.

    Raises:
        ValidationError: If ``num_actions ** num_states`` exceeds 1e6.
    """
    count = mdp.num_actions**mdp.num_states
    if count > VERTEX_ENUM_LIMIT:
        raise ValidationError(f"{count} deterministic policies exceed the enumeration limit")
    policies = []
    measures = np.zeros((count, mdp.num_pairs))
    for i, actions in enumerate(itertools.product(range(mdp.num_actions), repeat=mdp.num_states)):
        pol = deterministic_policy(mdp, actions)
        policies.append(pol)
        measures[i] = occupancy_measure(mdp, pol).values
    return policies, measures
