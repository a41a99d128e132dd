"""Core tabular MDP types and occupancy-measure operations.

State-action vectors are flat, indexed ``s * num_actions + a`` (state-major).
Occupancy measures use the discounted convention and sum to ``1 / (1 - discount)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleMeasureError, ValidationError

ROW_SUM_TOL = 1e-12
MEASURE_NEG_TOL = 1e-10
MEASURE_MASS_TOL = 1e-8
MEASURE_RESIDUAL_TOL = 1e-6


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TabularMdp:
    """A finite MDP with dense transition tensor and fixed initial distribution.

    Attributes:
        num_states: Number of states.
        num_actions: Number of actions, identical in every state.
        transition: Array of shape (S, A, S); ``transition[s, a, s']`` is the
            probability of moving to ``s'`` after taking ``a`` in ``s``.
        initial_dist: Initial state distribution, shape (S,).
        discount: Discount factor in [0, 1).
        terminal_mask: Boolean array of shape (S,); terminal states must be
            absorbing self-loops.
    """

    num_states: int
    num_actions: int
    transition: np.ndarray
    initial_dist: np.ndarray
    discount: float
    terminal_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "transition", _as_readonly(self.transition))
        object.__setattr__(self, "initial_dist", _as_readonly(self.initial_dist))
        if self.terminal_mask is None:
            mask = np.zeros(self.num_states, dtype=bool)
        else:
            mask = np.array(self.terminal_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "terminal_mask", mask)
        problems = validate_mdp(self)
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def num_pairs(self) -> int:
        return self.num_states * self.num_actions

    def sa_index(self, state: int, action: int) -> int:
        return state * self.num_actions + action

    def to_json(self) -> str:
        payload = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "discount": self.discount,
            "initial_dist": self.initial_dist.tolist(),
            "terminal_mask": self.terminal_mask.astype(int).tolist(),
            "transition": self.transition.tolist(),
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "TabularMdp":
        payload = json.loads(text)
        return TabularMdp(
            num_states=int(payload["num_states"]),
            num_actions=int(payload["num_actions"]),
            transition=np.array(payload["transition"], dtype=float),
            initial_dist=np.array(payload["initial_dist"], dtype=float),
            discount=float(payload["discount"]),
            terminal_mask=np.array(payload["terminal_mask"], dtype=bool),
        )


def validate_mdp(mdp: TabularMdp) -> list:
    """Returns a list of human-readable problems; empty means the MDP is valid."""
    problems = []
    s, a = mdp.num_states, mdp.num_actions
    if s < 1 or a < 1:
        problems.append("num_states and num_actions must be positive")
        return problems
    if mdp.transition.shape != (s, a, s):
        problems.append(f"transition shape {mdp.transition.shape} != {(s, a, s)}")
        return problems
    if mdp.initial_dist.shape != (s,):
        problems.append(f"initial_dist shape {mdp.initial_dist.shape} != {(s,)}")
        return problems
    if np.any(mdp.transition < 0):
        problems.append("transition has negative entries")
    row_err = np.abs(mdp.transition.sum(axis=2) - 1.0).max()
    if row_err > ROW_SUM_TOL:
        problems.append(f"transition rows deviate from 1 by {row_err:.3g}")
    if np.any(mdp.initial_dist < 0):
        problems.append("initial_dist has negative entries")
    if abs(mdp.initial_dist.sum() - 1.0) > ROW_SUM_TOL:
        problems.append("initial_dist does not sum to 1")
    if not (0.0 <= mdp.discount < 1.0):
        problems.append(f"discount {mdp.discount} outside [0, 1)")
    if mdp.terminal_mask.shape != (s,):
        problems.append(f"terminal_mask shape {mdp.terminal_mask.shape} != {(s,)}")
    else:
        for t in np.flatnonzero(mdp.terminal_mask):
            expected = np.zeros(s)
            expected[t] = 1.0
            if np.abs(mdp.transition[t] - expected).max() > ROW_SUM_TOL:
                problems.append(f"terminal state {t} is not an absorbing self-loop")
    return problems


@dataclass(frozen=True)
class Policy:
    """A stationary stochastic policy; ``probs[s, a]`` is the action probability."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_readonly(self.probs)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 2:
            raise ValidationError("policy must be a 2-d array")
        if np.any(probs < 0) or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValidationError("policy rows must be distributions")

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


def uniform_policy(mdp: TabularMdp) -> Policy:
    return Policy(np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions))


def deterministic_policy(mdp: TabularMdp, actions: Sequence[int]) -> Policy:
    probs = np.zeros((mdp.num_states, mdp.num_actions))
    probs[np.arange(mdp.num_states), np.asarray(actions, dtype=int)] = 1.0
    return Policy(probs)


@dataclass(frozen=True)
class RewardVector:
    """A state-action reward as a flat vector of length ``num_states * num_actions``."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_readonly(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", values)

    def table(self, mdp: TabularMdp) -> np.ndarray:
        return self.values.reshape(mdp.num_states, mdp.num_actions)

    def to_json(self) -> str:
        return json.dumps(self.values.tolist())

    @staticmethod
    def from_json(text: str) -> "RewardVector":
        return RewardVector(np.array(json.loads(text), dtype=float))


def reward_from_table(table: np.ndarray) -> RewardVector:
    return RewardVector(np.asarray(table, dtype=float).ravel())


@dataclass(frozen=True)
class OccupancyMeasure:
    """Discounted state-action visitation frequencies as a flat vector."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_readonly(np.asarray(self.values).ravel()))

    def check(self, mdp: TabularMdp):
        """Raises unless the vector is non-negative with total mass 1 / (1 - discount)."""
        if self.values.shape != (mdp.num_pairs,):
            raise ValidationError(
                f"measure length {self.values.shape} != {(mdp.num_pairs,)}"
            )
        if self.values.min() < -MEASURE_NEG_TOL:
            raise ValidationError(f"measure entry {self.values.min():.3g} below 0")
        mass = 1.0 / (1.0 - mdp.discount)
        if abs(self.values.sum() - mass) > MEASURE_MASS_TOL * mass:
            raise ValidationError(
                f"measure mass {self.values.sum():.12g} != {mass:.12g}"
            )

    def state_values(self, mdp: TabularMdp) -> np.ndarray:
        return self.values.reshape(mdp.num_states, mdp.num_actions).sum(axis=1)


def flow_residual(mdp: TabularMdp, values: np.ndarray) -> np.ndarray:
    """Bellman-flow residual of a candidate measure, one entry per state.

    Computes ``sum_a eta(s', a) - discount * sum_{s,a} tau(s,a,s') eta(s,a) - mu(s')``
    without materialising the constraint matrix.
    """
    eta = np.asarray(values, dtype=float).reshape(mdp.num_states, mdp.num_actions)
    inflow = np.einsum("sa,sat->t", eta, mdp.transition)
    return eta.sum(axis=1) - mdp.discount * inflow - mdp.initial_dist


def occupancy_measure(mdp: TabularMdp, policy: Policy) -> OccupancyMeasure:
    """Exact discounted occupancy measure of a policy.

    Solves the state-flow system ``(I - discount * P_pi^T) x = mu`` and spreads
    each state's visitation over actions by the policy probabilities.

    Args:
        mdp: The environment.
        policy: A stationary policy with matching dimensions.

    Returns:
        The occupancy measure, which satisfies the flow constraints exactly up
        to linear-solver precision.
    """
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    lhs = np.eye(mdp.num_states) - mdp.discount * p_pi.T
    x = np.linalg.solve(lhs, mdp.initial_dist)
    eta = x[:, None] * policy.probs
    return OccupancyMeasure(eta.ravel())


def rollout_occupancy(
    mdp: TabularMdp,
    policy: Policy,
    num_rollouts: int = 2000,
    horizon: int | None = None,
    seed: int = 0,
) -> OccupancyMeasure:
    """Monte Carlo estimate of the occupancy measure from sampled trajectories.

    Args:
        mdp: The environment.
        policy: Policy to roll out.
        num_rollouts: Number of independent trajectories.
        horizon: Truncation length; defaults to enough steps that the ignored
            tail mass is below 1e-6 of the total.
        seed: RNG seed.

    Returns:
        Averaged discounted visitation counts; the truncated tail mass is
        left unassigned, so totals fall slightly short of 1 / (1 - discount).
    """
    if horizon is None:
        if mdp.discount == 0.0:
            horizon = 1
        else:
            horizon = int(np.ceil(np.log(1e-6) / np.log(mdp.discount))) + 1
    rng = np.random.default_rng(seed)
    counts = np.zeros((mdp.num_states, mdp.num_actions))
    states = np.arange(mdp.num_states)
    for _ in range(num_rollouts):
        s = rng.choice(states, p=mdp.initial_dist)
        disc = 1.0
        for _ in range(horizon):
            a = rng.choice(mdp.num_actions, p=policy.probs[s])
            counts[s, a] += disc
            disc *= mdp.discount
            s = rng.choice(states, p=mdp.transition[s, a])
    return OccupancyMeasure(counts.ravel() / num_rollouts)


def policy_return(mdp: TabularMdp, reward: RewardVector, policy: Policy) -> float:
    """Expected discounted return ``eta_pi . r`` computed from the exact measure."""
    return float(occupancy_measure(mdp, policy).values @ reward.values)


def policy_from_occupancy(mdp: TabularMdp, measure: OccupancyMeasure) -> Policy:
    """Recovers the policy that induces a feasible occupancy measure.

    Args:
        mdp: The environment.
        measure: Candidate measure; must satisfy the flow constraints within
            1e-6 and be non-negative within 1e-10.

    Returns:
        The policy with ``probs[s, a] = eta(s, a) / sum_a' eta(s, a')``;
        states with no visitation get a uniform row.

    Raises:
        InfeasibleMeasureError: If the measure violates the flow constraints.
    """
    measure.check(mdp)
    residual = np.abs(flow_residual(mdp, measure.values)).max()
    if residual > MEASURE_RESIDUAL_TOL:
        raise InfeasibleMeasureError(f"flow residual {residual:.3g} exceeds 1e-6")
    eta = np.clip(measure.values.reshape(mdp.num_states, mdp.num_actions), 0.0, None)
    totals = eta.sum(axis=1)
    probs = np.full_like(eta, 1.0 / mdp.num_actions)
    visited = totals > MEASURE_NEG_TOL / (1.0 - mdp.discount)
    probs[visited] = eta[visited] / totals[visited, None]
    return Policy(probs)
