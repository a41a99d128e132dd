"""Independent oracles used across the test suite.

The oracles deliberately avoid the library's solver routes: occupancy
measures come from forward induction, returns from policy evaluation in
value space, and optima from explicit enumeration.
"""

import numpy as np

from goodhart import Policy, TabularMdp, deterministic_policy


def tiny_random_mdp(
    num_states: int,
    num_actions: int,
    gamma: float = 0.9,
    seed: int = 0,
    num_terminal: int = 0,
) -> TabularMdp:
    """Random dense MDP with Dirichlet transition rows and uniform start."""
    rng = np.random.default_rng(seed)
    trans = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    terminal = np.zeros(num_states, dtype=bool)
    if num_terminal:
        terminal[num_states - num_terminal :] = True
        for t in np.flatnonzero(terminal):
            trans[t] = 0.0
            trans[t, :, t] = 1.0
    return TabularMdp(
        num_states,
        num_actions,
        trans,
        np.full(num_states, 1.0 / num_states),
        gamma,
        terminal,
    )


def forward_occupancy(mdp: TabularMdp, policy: Policy, tol: float = 1e-10) -> np.ndarray:
    """Occupancy measure by forward induction, independent of linear solves.

    Accumulates discounted state-distribution iterates until the remaining
    tail mass drops below ``tol``.
    """
    dist = mdp.initial_dist.copy()
    eta = np.zeros((mdp.num_states, mdp.num_actions))
    disc = 1.0
    # Tail after T steps is bounded by disc / (1 - gamma).
    while disc / (1.0 - mdp.discount) > tol:
        eta += disc * dist[:, None] * policy.probs
        flat = (dist[:, None] * policy.probs)[:, :, None] * mdp.transition
        dist = flat.sum(axis=(0, 1))
        disc *= mdp.discount
    return eta.ravel()


def value_space_return(mdp: TabularMdp, reward_values: np.ndarray, policy: Policy) -> float:
    """Expected return via state-value policy evaluation instead of measures."""
    r_table = np.asarray(reward_values, dtype=float).reshape(
        mdp.num_states, mdp.num_actions
    )
    r_pi = (policy.probs * r_table).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    v = np.linalg.solve(np.eye(mdp.num_states) - mdp.discount * p_pi, r_pi)
    return float(mdp.initial_dist @ v)


def all_det_policies(mdp: TabularMdp) -> list:
    """Every deterministic policy, enumerated directly."""
    import itertools

    out = []
    for actions in itertools.product(range(mdp.num_actions), repeat=mdp.num_states):
        out.append(deterministic_policy(mdp, actions))
    return out


def brute_best_return(mdp: TabularMdp, reward_values: np.ndarray) -> float:
    """Max return over deterministic policies via value-space evaluation."""
    return max(value_space_return(mdp, reward_values, p) for p in all_det_policies(mdp))
