"""Environment generators, reward samplers, and proxy construction.

Four families are provided: deterministic grids with two terminal corners, a
cliff-walking variant with slip dynamics, uniformly random MDPs, and rooted
trees whose non-terminal leaves loop back to the root.  Rewards are sampled
per state and compiled to state-action form as the expectation over next
states; terminal self-loop pairs earn zero so a terminal reward is collected
once on entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .mdp import RewardVector, TabularMdp

GRID_ACTIONS = ("up", "right", "down", "left", "wait")

ENV_KINDS = ("gridworld", "cliff", "random", "tree")
REWARD_KINDS = ("terminal", "cliff", "path", "uniform")
TREE_VARIANTS = ("first", "alternating")


@dataclass(frozen=True)
class Env:
    """A generated environment: the MDP plus layout details used by samplers."""

    kind: str
    mdp: TabularMdp
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EnvSpec:
    """A declarative environment description, parseable from config files.

    Attributes:
        kind: One of ``gridworld``, ``cliff``, ``random``, ``tree``.
        params: Size parameters for the family (``n`` | ``n, p`` |
            ``num_states, num_actions, num_terminal`` | ``branching, depth,
            variant``).
        discount: Discount factor; may be filled in later by a sweep.
        seed: Seed for stochastic generators.
    """

    kind: str
    params: dict
    discount: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {self.kind!r}")

    def with_discount(self, discount: float) -> "EnvSpec":
        return EnvSpec(self.kind, dict(self.params), discount, self.seed)

    def build(self) -> Env:
        if self.discount is None:
            raise ConfigError("discount not set on EnvSpec")
        p = self.params
        if self.kind == "gridworld":
            return make_gridworld(int(p["n"]), self.discount)
        if self.kind == "cliff":
            return make_cliff(int(p["n"]), float(p["p"]), self.discount)
        if self.kind == "random":
            return make_random_mdp(
                int(p["num_states"]),
                int(p["num_actions"]),
                int(p["num_terminal"]),
                self.discount,
                self.seed,
            )
        return make_tree_mdp(
            int(p["branching"]), int(p["depth"]), str(p["variant"]), self.discount
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.discount is not None:
            out["discount"] = self.discount
        if self.seed:
            out["seed"] = self.seed
        return out

    @staticmethod
    def from_dict(data: dict) -> "EnvSpec":
        data = dict(data)
        kind = data.pop("kind")
        discount = data.pop("discount", None)
        seed = int(data.pop("seed", 0))
        return EnvSpec(kind, data, discount, seed)


@dataclass(frozen=True)
class ProxySpec:
    """How one proxy reward is derived from the sampled pair.

    Attributes:
        reward_kind: Sampler name, one of ``terminal``, ``cliff``, ``path``,
            ``uniform``.
        sparsity: Fraction of entries zeroed, in [0, 1].
        interpolation: Position ``t`` on the segment from the true reward to
            the second sample, in [0, 1].
        seed: Sampler seed.
    """

    reward_kind: str
    sparsity: float = 0.0
    interpolation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.reward_kind not in REWARD_KINDS:
            raise ConfigError(f"unknown reward kind {self.reward_kind!r}")
        if not (0.0 <= self.sparsity <= 1.0):
            raise ConfigError("sparsity must lie in [0, 1]")
        if not (0.0 <= self.interpolation <= 1.0):
            raise ConfigError("interpolation must lie in [0, 1]")


def _grid_transitions(n: int, terminal: np.ndarray) -> np.ndarray:
    states = n * n
    trans = np.zeros((states, 5, states))
    for s in range(states):
        if terminal[s]:
            trans[s, :, s] = 1.0
            continue
        row, col = divmod(s, n)
        moves = [
            (row - 1, col),
            (row, col + 1),
            (row + 1, col),
            (row, col - 1),
            (row, col),
        ]
        for a, (r2, c2) in enumerate(moves):
            if 0 <= r2 < n and 0 <= c2 < n:
                dest = r2 * n + c2
            else:
                dest = s
            trans[s, a, dest] = 1.0
    return trans


def make_gridworld(n: int, gamma: float) -> Env:
    """Deterministic n-by-n grid with five actions and two terminal corners.

    Actions are up, right, down, left, wait; moves off the grid leave the
    state unchanged.  The upper-left and lower-right corners are absorbing
    terminal states.  The initial distribution is uniform over all cells.
    """
    if n < 2:
        raise ConfigError("gridworld needs n >= 2")
    states = n * n
    terminal = np.zeros(states, dtype=bool)
    terminal[0] = terminal[states - 1] = True
    trans = _grid_transitions(n, terminal)
    mdp = TabularMdp(states, 5, trans, np.full(states, 1.0 / states), gamma, terminal)
    return Env("gridworld", mdp, {"n": n, "goal": states - 1, "start": 0})


def make_cliff(n: int, p: float, gamma: float) -> Env:
    """Grid variant with a terminal cliff along the bottom row and slip dynamics.

    The bottom row except the lower-right goal forms the cliff; cliff cells
    and the goal are absorbing terminals.  From any state directly above a
    cliff cell, every move slips into that cliff cell with probability ``p``.
    Unlike the uniform gridworld start, episodes begin at the upper-left
    corner, so reaching the goal requires a trek past the cliff row.
    """
    if n < 2:
        raise ConfigError("cliff needs n >= 2")
    if not (0.0 <= p <= 1.0):
        raise ConfigError("slip probability must lie in [0, 1]")
    states = n * n
    goal = states - 1
    cliff = [(n - 1) * n + c for c in range(n - 1)]
    terminal = np.zeros(states, dtype=bool)
    terminal[goal] = True
    terminal[cliff] = True
    trans = _grid_transitions(n, terminal)
    for s in range(states):
        if terminal[s]:
            continue
        row, col = divmod(s, n)
        below = (row + 1) * n + col
        if row + 1 == n - 1 and below in cliff:
            trans[s] = (1.0 - p) * trans[s]
            trans[s, :, below] += p
    initial = np.zeros(states)
    initial[0] = 1.0
    mdp = TabularMdp(states, 5, trans, initial, gamma, terminal)
    return Env("cliff", mdp, {"n": n, "p": p, "goal": goal, "start": 0, "cliff_cells": cliff})


def make_random_mdp(
    num_states: int, num_actions: int, num_terminal: int, gamma: float, seed: int = 0
) -> Env:
    """MDP with transition rows drawn uniformly from the probability simplex.

    Rows are sampled by the sorted-uniform-gaps construction, equivalent to a
    flat Dirichlet.  The last ``num_terminal`` states are absorbing terminals.
    """
    if num_states < 1 or num_actions < 1:
        raise ConfigError("need positive state and action counts")
    if not (0 <= num_terminal < num_states):
        raise ConfigError("num_terminal must be in [0, num_states)")
    rng = np.random.default_rng(seed)
    terminal = np.zeros(num_states, dtype=bool)
    terminal[num_states - num_terminal :] = num_terminal > 0
    trans = np.zeros((num_states, num_actions, num_states))
    for s in range(num_states):
        if terminal[s]:
            trans[s, :, s] = 1.0
            continue
        for a in range(num_actions):
            cuts = np.sort(rng.uniform(0.0, 1.0, num_states - 1))
            trans[s, a] = np.diff(np.concatenate(([0.0], cuts, [1.0])))
    mdp = TabularMdp(
        num_states, num_actions, trans, np.full(num_states, 1.0 / num_states), gamma, terminal
    )
    return Env(
        "random",
        mdp,
        {"num_states": num_states, "num_actions": num_actions, "num_terminal": num_terminal},
    )


def make_tree_mdp(branching: int, depth: int, variant: str, gamma: float) -> Env:
    """Rooted tree MDP; action j moves to child j, non-terminal leaves reset.

    States are the nodes of a complete tree of the given branching factor and
    depth, numbered level by level from the root.  Half of the leaves
    (rounded up) are absorbing terminals: the first half under variant
    ``first``, the even-indexed leaves under variant ``alternating``.  The
    remaining leaves return to the root under every action.  The initial
    distribution is concentrated on the root.
    """
    if branching < 2 or depth < 1:
        raise ConfigError("tree needs branching >= 2 and depth >= 1")
    if variant not in TREE_VARIANTS:
        raise ConfigError(f"unknown tree variant {variant!r}")
    level_sizes = [branching**level for level in range(depth + 1)]
    starts = np.concatenate(([0], np.cumsum(level_sizes)))
    states = int(starts[-1])
    num_leaves = level_sizes[-1]
    leaf_ids = np.arange(starts[depth], states)
    if variant == "first":
        terminal_leaves = leaf_ids[: (num_leaves + 1) // 2]
    else:
        terminal_leaves = leaf_ids[::2]
    terminal = np.zeros(states, dtype=bool)
    terminal[terminal_leaves] = True
    trans = np.zeros((states, branching, states))
    for level in range(depth):
        for j in range(level_sizes[level]):
            node = int(starts[level] + j)
            for a in range(branching):
                child = int(starts[level + 1] + j * branching + a)
                trans[node, a, child] = 1.0
    for leaf in leaf_ids:
        if terminal[leaf]:
            trans[leaf, :, leaf] = 1.0
        else:
            trans[leaf, :, 0] = 1.0
    mu = np.zeros(states)
    mu[0] = 1.0
    mdp = TabularMdp(states, branching, trans, mu, gamma, terminal)
    return Env(
        "tree",
        mdp,
        {
            "branching": branching,
            "depth": depth,
            "variant": variant,
            "leaves": leaf_ids.tolist(),
        },
    )


def make_m22() -> Env:
    """The two-state, two-action example MDP (discount 0.9, uniform start)."""
    trans = np.array(
        [
            [[0.9, 0.1], [0.1, 0.9]],
            [[0.5, 0.5], [0.8, 0.2]],
        ]
    )
    mdp = TabularMdp(2, 2, trans, np.array([0.5, 0.5]), 0.9)
    return Env("m22", mdp, {})


M22_R0 = RewardVector(np.array([0.170, 0.228, 0.538, 0.064]))
M22_R1 = RewardVector(np.array([0.248, 0.196, 0.467, 0.089]))
M22_R2 = RewardVector(np.array([0.325, 0.165, 0.396, 0.114]))


def make_m32() -> Env:
    """The three-state, two-action example MDP with an isolated absorbing state."""
    trans = np.array(
        [
            [[0.9, 0.1, 0.0], [0.1, 0.9, 0.0]],
            [[0.1, 0.9, 0.0], [0.9, 0.1, 0.0]],
            [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
        ]
    )
    mdp = TabularMdp(3, 2, trans, np.full(3, 1.0 / 3.0), 0.9)
    return Env("m32", mdp, {})


M32_R0 = RewardVector(np.array([0.290, 0.020, 0.191, 0.202, 0.263, 0.034]))
M32_R1 = RewardVector(np.array([0.263, 0.195, 0.110, 0.090, 0.161, 0.181]))


def _path_cells(n: int, rng: np.random.Generator) -> set:
    """Seeded right/down walk from the upper-left to the lower-right corner."""
    row = col = 0
    cells = {0}
    while (row, col) != (n - 1, n - 1):
        if row == n - 1:
            col += 1
        elif col == n - 1:
            row += 1
        elif rng.integers(2) == 0:
            col += 1
        else:
            row += 1
        cells.add(row * n + col)
    return cells


def sample_state_rewards(env: Env, kind: str, seed: int = 0) -> np.ndarray:
    """Per-state rewards for a sampler kind, before state-action compilation.

    Terminal: U(0, 1) on terminals, U(-1, 0) elsewhere.  Cliff: U(-5, 0) on
    cliff cells, U(0, 1) on the goal, U(-1, 0) elsewhere.  Path: exactly 0 on
    a seeded right/down walk between the corners, U(0, 1) on terminals,
    U(-1, 0) off the path.  Uniform: U(0, 1) everywhere.

    Raises:
        ValidationError: For sampler/environment mismatches (``cliff`` needs
            the cliff family, ``path`` needs a gridworld).
    """
    if kind not in REWARD_KINDS:
        raise ConfigError(f"unknown reward kind {kind!r}")
    if kind == "cliff" and env.kind != "cliff":
        raise ValidationError("cliff rewards need a cliff environment")
    if kind == "path" and env.kind != "gridworld":
        raise ValidationError("path rewards need a gridworld environment")
    mdp = env.mdp
    rng = np.random.default_rng(seed)
    on_path: set = set()
    if kind == "path":
        on_path = _path_cells(env.meta["n"], rng)
    cliff_cells = set(env.meta.get("cliff_cells", []))
    goal = env.meta.get("goal")
    values = np.zeros(mdp.num_states)
    for s in range(mdp.num_states):
        if kind == "uniform":
            values[s] = rng.uniform(0.0, 1.0)
        elif kind == "terminal":
            values[s] = rng.uniform(0.0, 1.0) if mdp.terminal_mask[s] else rng.uniform(-1.0, 0.0)
        elif kind == "cliff":
            if s in cliff_cells:
                values[s] = rng.uniform(-5.0, 0.0)
            elif s == goal:
                values[s] = rng.uniform(0.0, 1.0)
            else:
                values[s] = rng.uniform(-1.0, 0.0)
        else:
            if mdp.terminal_mask[s]:
                values[s] = rng.uniform(0.0, 1.0)
            elif s in on_path:
                values[s] = 0.0
            else:
                values[s] = rng.uniform(-1.0, 0.0)
    return values


def compile_state_reward(mdp: TabularMdp, state_values: np.ndarray) -> RewardVector:
    """Attaches next-state rewards to source pairs; terminal self-loops earn 0."""
    table = mdp.transition @ np.asarray(state_values, dtype=float)
    table[mdp.terminal_mask] = 0.0
    return RewardVector(table.ravel())


def sample_reward(env: Env, kind: str, seed: int = 0) -> RewardVector:
    """Samples a per-state reward and compiles it to state-action form."""
    return compile_state_reward(env.mdp, sample_state_rewards(env, kind, seed))


def sparsify(reward: RewardVector, sigma: float, seed: int = 0) -> RewardVector:
    """Zeroes exactly ``round(sigma * len)`` seeded-uniformly-chosen entries."""
    if not (0.0 <= sigma <= 1.0):
        raise ConfigError("sigma must lie in [0, 1]")
    values = reward.values.copy()
    count = int(np.rint(sigma * values.size))
    rng = np.random.default_rng(seed)
    idx = rng.choice(values.size, size=count, replace=False)
    values[idx] = 0.0
    return RewardVector(values)


def interpolate(r0: RewardVector, r1: RewardVector, t: float) -> RewardVector:
    """Convex combination ``(1 - t) r0 + t r1``."""
    if not (0.0 <= t <= 1.0):
        raise ConfigError("t must lie in [0, 1]")
    if r0.values.shape != r1.values.shape:
        raise ValidationError("reward lengths differ")
    return RewardVector((1.0 - t) * r0.values + t * r1.values)
