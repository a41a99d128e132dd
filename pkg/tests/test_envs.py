"""Environment factories, reward samplers, and spec round trips."""

import numpy as np
import pytest
from scipy import stats

from goodhart import (
    ConfigError,
    EnvSpec,
    ProxySpec,
    RewardVector,
    ValidationError,
    compile_state_reward,
    interpolate,
    make_cliff,
    make_gridworld,
    make_m22,
    make_m32,
    make_random_mdp,
    make_tree_mdp,
    sample_reward,
    sample_state_rewards,
    sparsify,
)
from goodhart.envs import M22_R0, M32_R0


def test_gridworld_layout():
    env = make_gridworld(3, 0.9)
    mdp = env.mdp
    assert mdp.transition.shape == (9, 5, 9)
    assert mdp.terminal_mask[0] and mdp.terminal_mask[8]
    assert np.allclose(mdp.initial_dist, 1.0 / 9.0)
    # Center cell: up, right, down, left, wait.
    for a, dest in enumerate((1, 5, 7, 3, 4)):
        assert mdp.transition[4, a, dest] == 1.0
    # Edge cell 1 moving up leaves the grid and stays put.
    assert mdp.transition[1, 0, 1] == 1.0


def test_gridworld_rejects_tiny_grid():
    with pytest.raises(ConfigError):
        make_gridworld(1, 0.9)


def test_cliff_layout_and_start():
    env = make_cliff(4, 0.5, 0.9)
    mdp = env.mdp
    cliff = env.meta["cliff_cells"]
    assert cliff == [12, 13, 14]
    assert env.meta["goal"] == 15
    mask = np.zeros(16, dtype=bool)
    mask[cliff] = mask[15] = True
    assert np.array_equal(mdp.terminal_mask, mask)
    start = np.zeros(16)
    start[0] = 1.0
    assert np.array_equal(mdp.initial_dist, start)


def test_cliff_without_slip_matches_grid_moves():
    grid = make_gridworld(4, 0.9).mdp
    cliff = make_cliff(4, 0.0, 0.9)
    special = {0, 15} | set(cliff.meta["cliff_cells"])
    for s in range(16):
        if s in special:
            continue
        assert np.array_equal(cliff.mdp.transition[s], grid.transition[s])


def test_cliff_slip_probability_from_row_above():
    p = 0.3
    env = make_cliff(4, p, 0.9)
    mdp = env.mdp
    # State 9 sits directly above cliff cell 13.
    for a in range(5):
        expected = p + (0.7 if a == 2 else 0.0)
        assert np.isclose(mdp.transition[9, a, 13], expected)
    # States in higher rows never slip.
    assert np.all(mdp.transition[1, :, [12, 13, 14]] == 0.0)


def test_cliff_rejects_bad_slip():
    with pytest.raises(ConfigError):
        make_cliff(4, 1.5, 0.9)


def test_random_mdp_terminals_and_rows():
    env = make_random_mdp(6, 3, 2, 0.9, seed=5)
    mdp = env.mdp
    assert np.array_equal(mdp.terminal_mask, np.arange(6) >= 4)
    assert np.allclose(mdp.transition.sum(axis=2), 1.0)
    assert np.allclose(mdp.initial_dist, 1.0 / 6.0)


def test_random_mdp_rows_are_flat_dirichlet():
    # First spacing of sorted uniforms is Beta(1, K - 1); KS on iid draws.
    first = []
    for seed in range(60):
        mdp = make_random_mdp(6, 2, 0, 0.9, seed=seed).mdp
        first.extend(mdp.transition[:, :, 0].ravel())
    res = stats.kstest(np.asarray(first), stats.beta(1, 5).cdf)
    assert res.pvalue > 1e-3


def test_random_mdp_validation():
    with pytest.raises(ConfigError):
        make_random_mdp(0, 2, 0, 0.9)
    with pytest.raises(ConfigError):
        make_random_mdp(4, 2, 4, 0.9)


def test_tree_structure():
    env = make_tree_mdp(2, 2, "first", 0.9)
    mdp = env.mdp
    assert mdp.num_states == 7
    assert env.meta["leaves"] == [3, 4, 5, 6]
    assert np.array_equal(np.flatnonzero(mdp.terminal_mask), [3, 4])
    assert mdp.initial_dist[0] == 1.0
    # Children of the root and of node 1.
    assert mdp.transition[0, 0, 1] == 1.0 and mdp.transition[0, 1, 2] == 1.0
    assert mdp.transition[1, 0, 3] == 1.0 and mdp.transition[1, 1, 4] == 1.0
    # Non-terminal leaves reset to the root under every action.
    assert np.all(mdp.transition[5, :, 0] == 1.0)
    assert np.all(mdp.transition[6, :, 0] == 1.0)


def test_tree_variants_differ():
    first = make_tree_mdp(2, 2, "first", 0.9).mdp.terminal_mask
    alt = make_tree_mdp(2, 2, "alternating", 0.9).mdp.terminal_mask
    assert np.array_equal(np.flatnonzero(alt), [3, 5])
    assert not np.array_equal(first, alt)
    with pytest.raises(ConfigError):
        make_tree_mdp(2, 2, "last", 0.9)


def test_m22_and_m32_constants():
    m22 = make_m22()
    assert m22.mdp.discount == 0.9
    assert np.allclose(m22.mdp.transition[1, 1], [0.8, 0.2])
    assert M22_R0.values.shape == (4,)
    m32 = make_m32()
    assert m32.mdp.num_states == 3
    assert np.all(m32.mdp.transition[2, :, 2] == 1.0)
    assert M32_R0.values.shape == (6,)


def test_env_spec_round_trip():
    specs = [
        EnvSpec("gridworld", {"n": 3}, 0.9),
        EnvSpec("cliff", {"n": 4, "p": 0.5}, 0.7, seed=2),
        EnvSpec("random", {"num_states": 6, "num_actions": 2, "num_terminal": 1}, 0.9, seed=7),
        EnvSpec("tree", {"branching": 2, "depth": 3, "variant": "first"}, 0.9),
    ]
    for spec in specs:
        assert EnvSpec.from_dict(spec.to_dict()) == spec
        env = spec.build()
        assert env.kind == spec.kind
        assert env.mdp.discount == spec.discount


def test_env_spec_requires_discount():
    spec = EnvSpec("gridworld", {"n": 3})
    with pytest.raises(ConfigError):
        spec.build()
    assert spec.with_discount(0.8).build().mdp.discount == 0.8
    with pytest.raises(ConfigError):
        EnvSpec("maze", {"n": 3})


def test_proxy_spec_validation():
    ProxySpec("uniform", sparsity=0.5, interpolation=0.2)
    with pytest.raises(ConfigError):
        ProxySpec("dense")
    with pytest.raises(ConfigError):
        ProxySpec("uniform", sparsity=1.2)
    with pytest.raises(ConfigError):
        ProxySpec("uniform", interpolation=-0.1)


def test_terminal_reward_signs():
    env = make_gridworld(4, 0.9)
    values = sample_state_rewards(env, "terminal", seed=3)
    assert np.all(values[env.mdp.terminal_mask] >= 0.0)
    assert np.all(values[~env.mdp.terminal_mask] <= 0.0)


def test_cliff_reward_bands():
    env = make_cliff(4, 0.5, 0.9)
    values = sample_state_rewards(env, "cliff", seed=4)
    cliff = env.meta["cliff_cells"]
    assert np.all(values[cliff] >= -5.0) and np.all(values[cliff] <= 0.0)
    assert 0.0 <= values[env.meta["goal"]] <= 1.0
    rest = [s for s in range(16) if s not in cliff and s != env.meta["goal"]]
    assert np.all(values[rest] >= -1.0) and np.all(values[rest] <= 0.0)


def test_path_reward_traces_monotone_walk():
    n = 5
    env = make_gridworld(n, 0.9)
    values = sample_state_rewards(env, "path", seed=6)
    zeros = np.flatnonzero(values == 0.0)
    # A right/down walk hits one cell per anti-diagonal between the corners.
    assert zeros.size == 2 * n - 3
    levels = sorted(divmod(s, n)[0] + divmod(s, n)[1] for s in zeros)
    assert levels == list(range(1, 2 * n - 2))
    assert np.all(values[env.mdp.terminal_mask] >= 0.0)


def test_uniform_reward_range():
    env = make_gridworld(3, 0.9)
    values = sample_state_rewards(env, "uniform", seed=7)
    assert np.all((values >= 0.0) & (values <= 1.0))


def test_sampler_environment_mismatches():
    grid = make_gridworld(3, 0.9)
    rand = make_random_mdp(4, 2, 1, 0.9)
    with pytest.raises(ValidationError):
        sample_state_rewards(grid, "cliff")
    with pytest.raises(ValidationError):
        sample_state_rewards(rand, "path")
    with pytest.raises(ConfigError):
        sample_state_rewards(grid, "dense")


def test_compile_state_reward_expectation():
    env = make_random_mdp(5, 2, 1, 0.9, seed=8)
    mdp = env.mdp
    values = sample_state_rewards(env, "uniform", seed=8)
    reward = compile_state_reward(mdp, values)
    table = reward.table(mdp)
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            want = 0.0 if mdp.terminal_mask[s] else mdp.transition[s, a] @ values
            assert np.isclose(table[s, a], want, atol=1e-12)


def test_sample_reward_seed_determinism():
    env = make_gridworld(4, 0.9)
    a = sample_reward(env, "terminal", seed=9)
    b = sample_reward(env, "terminal", seed=9)
    c = sample_reward(env, "terminal", seed=10)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_sparsify_boundary_fractions():
    reward = RewardVector(np.arange(1.0, 13.0))
    assert np.array_equal(sparsify(reward, 0.0).values, reward.values)
    assert np.all(sparsify(reward, 1.0).values == 0.0)
    with pytest.raises(ConfigError):
        sparsify(reward, 1.5)


def test_interpolate_validation():
    r0 = RewardVector(np.ones(4))
    with pytest.raises(ConfigError):
        interpolate(r0, r0, 1.5)
    with pytest.raises(ValidationError):
        interpolate(r0, RewardVector(np.ones(6)), 0.5)
