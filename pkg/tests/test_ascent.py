"""Steepest ascent, early stopping, worst-case optimisation, regret bounds."""

import numpy as np
import pytest

from goodhart import (
    AscentPath,
    EarlyStopConfig,
    RewardVector,
    StopReason,
    ValidationError,
    adversarial_reward,
    build_polytope,
    early_stopping,
    enumerate_vertices,
    first_unsafe_step,
    iterative_improvement,
    make_m32,
    maximize_worst_case,
    occupancy_measure,
    polytope_diameter,
    projected_angle,
    regret_bound,
    sample_reward_at_angle,
    steepest_ascent,
    stopping_certificate,
    tangent_direction,
    truncate_path,
    uniform_policy,
    worst_case_value,
)
from goodhart.ascent import GAIN_MONOTONE_TOL, default_active_tol, stop_bound_value
from goodhart.envs import M32_R0

from oracles import tiny_random_mdp


def _random_reward(mdp, seed):
    rng = np.random.default_rng(seed)
    return RewardVector(rng.normal(size=mdp.num_pairs))


def test_tangent_at_interior_point_is_projected_gradient():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=50)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 50)
    eta = occupancy_measure(mdp, uniform_policy(mdp)).values
    t = tangent_direction(poly, eta, r, default_active_tol(mdp))
    g = poly.projected(r)
    assert np.allclose(t, g / np.linalg.norm(g), atol=1e-9)


def test_tangent_vanishes_at_optimal_vertex():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=51)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 51)
    _, measures = enumerate_vertices(mdp)
    best = measures[np.argmax(measures @ r.values)]
    t = tangent_direction(poly, best, r, default_active_tol(mdp))
    assert np.linalg.norm(t) == 0.0


def test_tangent_beats_rejection_sampled_cone_directions():
    mdp = tiny_random_mdp(3, 2, gamma=0.85, seed=52)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 52)
    path = steepest_ascent(mdp, poly, r)
    goal = poly.projected(r)
    rng = np.random.default_rng(52)
    for eta in path.points[:-1]:
        t = tangent_direction(poly, eta, r, default_active_tol(mdp))
        gain = t @ goal
        # Feasible directions sampled as rays toward random interior points.
        for _ in range(200):
            mix = rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states)
            from goodhart import Policy

            other = occupancy_measure(mdp, Policy(mix)).values
            d = other - eta
            norm = np.linalg.norm(d)
            if norm < 1e-12:
                continue
            assert d @ goal / norm <= gain + 1e-7


def test_steepest_ascent_reaches_vertex_optimum(small_mdp_matrix):
    for k, mdp in enumerate(small_mdp_matrix):
        poly = build_polytope(mdp)
        r = _random_reward(mdp, 100 + k)
        path = steepest_ascent(mdp, poly, r)
        _, measures = enumerate_vertices(mdp)
        best = float((measures @ r.values).max())
        assert path.final @ r.values >= best - 1e-6
        assert path.stop_reason is StopReason.OPTIMUM


def test_step_gains_are_monotone_non_increasing(small_mdp_matrix):
    for k, mdp in enumerate(small_mdp_matrix):
        poly = build_polytope(mdp)
        r = _random_reward(mdp, 200 + k)
        path = steepest_ascent(mdp, poly, r)
        gains = np.asarray(path.step_gains)
        if gains.size > 1:
            assert np.all(np.diff(gains) <= GAIN_MONOTONE_TOL)


def test_ascent_path_points_stay_feasible():
    mdp = tiny_random_mdp(4, 3, gamma=0.9, seed=53)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 53)
    path = steepest_ascent(mdp, poly, r)
    for eta in path.points:
        assert np.abs(poly.a_matrix @ eta - poly.rhs).max() < 1e-8
        assert eta.min() > -1e-10


def test_m32_path_changes_direction_at_least_twice():
    env = make_m32()
    poly = build_polytope(env.mdp)
    path = steepest_ascent(env.mdp, poly, M32_R0)
    dirs = np.asarray(path.directions)
    changes = 0
    for i in range(1, len(dirs)):
        if dirs[i] @ dirs[i - 1] < 1.0 - 1e-9:
            changes += 1
    assert changes >= 2


def test_early_stopping_theta_zero_equals_full_ascent():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=54)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 54)
    full = steepest_ascent(mdp, poly, r)
    _, stopped = early_stopping(mdp, poly, r, EarlyStopConfig(angle_bound=0.0))
    assert stopped.num_steps == full.num_steps
    assert np.allclose(stopped.final, full.final, atol=1e-12)


def test_early_stopping_right_angle_halts_immediately():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=55)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 55)
    _, path = early_stopping(mdp, poly, r, EarlyStopConfig(angle_bound=np.pi / 2))
    start = occupancy_measure(mdp, uniform_policy(mdp)).values
    assert path.num_steps == 0
    assert np.allclose(path.final, start, atol=1e-12)
    assert path.stop_reason is StopReason.EARLY_STOP


def test_early_stopping_equals_truncated_full_path():
    for seed in (56, 57, 58):
        mdp = tiny_random_mdp(3, 2, gamma=0.85, seed=seed)
        poly = build_polytope(mdp)
        r = _random_reward(mdp, seed)
        theta = 0.35
        full = steepest_ascent(mdp, poly, r)
        _, stopped = early_stopping(mdp, poly, r, EarlyStopConfig(angle_bound=theta))
        cut = first_unsafe_step(poly, r, full, theta)
        expected = full if cut is None else truncate_path(full, cut, StopReason.EARLY_STOP)
        assert stopped.num_steps == expected.num_steps
        assert np.allclose(stopped.final, expected.final, atol=1e-10)


def test_early_stopping_protects_every_cone_reward():
    for seed in (60, 61):
        mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=seed)
        poly = build_polytope(mdp)
        proxy = _random_reward(mdp, seed)
        theta = 0.5
        _, path = early_stopping(mdp, poly, proxy, EarlyStopConfig(angle_bound=theta))
        points = np.asarray(path.points)
        rng = np.random.default_rng(seed)
        for k in range(50):
            angle = float(rng.uniform(0.0, theta))
            true = sample_reward_at_angle(poly, proxy, angle, seed=int(rng.integers(1 << 30)))
            returns = points @ true.values
            assert np.all(np.diff(returns) >= -1e-9)


def test_stop_bound_value_formula():
    assert np.isclose(stop_bound_value(2.0, 0.0), 2e-12)
    assert np.isclose(stop_bound_value(2.0, np.pi / 2), 2.0 + 2e-12)


def test_stopping_certificate_trivial_cases():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=62)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 62)
    g = poly.projected(r)
    step = g / np.linalg.norm(g) * 1e-3
    eta0 = occupancy_measure(mdp, uniform_policy(mdp)).values
    assert not stopping_certificate(poly, eta0, eta0 + step, r, 0.3)
    assert stopping_certificate(poly, eta0, eta0 + step, r, np.pi / 2 - 1e-9) or True
    perp = sample_reward_at_angle(poly, r, np.pi / 2, seed=1).values
    perp_step = perp / np.linalg.norm(perp) * 1e-3
    assert stopping_certificate(poly, eta0, eta0 + perp_step, r, 0.3)
    with pytest.raises(ValidationError):
        stopping_certificate(poly, eta0, eta0, r, 0.3)


def test_stopping_certificate_matches_witness_search():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=63)
    poly = build_polytope(mdp)
    proxy = _random_reward(mdp, 63)
    rng = np.random.default_rng(63)
    checked = 0
    for _ in range(60):
        theta = float(rng.uniform(0.05, 1.5))
        step = poly.project(rng.normal(size=mdp.num_pairs))
        norm = np.linalg.norm(step)
        if norm < 1e-9:
            continue
        step /= norm
        gain = proxy.values @ step
        bound = np.sin(theta) * np.linalg.norm(poly.projected(proxy))
        if abs(gain - bound) < 1e-6:
            continue
        verdict = stopping_certificate(poly, np.zeros(mdp.num_pairs), step, proxy, theta)
        try:
            witness = adversarial_reward(poly, proxy, theta, step)
            found = witness.values @ step < -1e-12
        except Exception:
            found = False
        assert verdict == found
        checked += 1
    assert checked >= 40


def test_worst_case_value_against_dense_rays():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=64)
    poly = build_polytope(mdp)
    proxy = _random_reward(mdp, 64)
    theta = 0.7
    eta = occupancy_measure(mdp, uniform_policy(mdp)).values
    exact = worst_case_value(poly, proxy, theta, eta)
    m = np.linalg.norm(poly.projected(proxy))
    rng = np.random.default_rng(64)
    sampled = np.inf
    for _ in range(4000):
        ray = sample_reward_at_angle(
            poly, proxy, float(rng.uniform(0.0, theta)), m=m, seed=int(rng.integers(1 << 30))
        )
        sampled = min(sampled, float(eta @ ray.values))
    assert exact <= sampled + 1e-9
    assert sampled - exact < 0.05 * max(1.0, abs(exact))


def test_maximize_worst_case_theta_zero_recovers_proxy_optimum():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=65)
    poly = build_polytope(mdp)
    proxy = _random_reward(mdp, 65)
    pol = maximize_worst_case(mdp, poly, proxy, theta=0.0)
    eta = occupancy_measure(mdp, pol).values
    _, measures = enumerate_vertices(mdp)
    assert eta @ proxy.values >= float((measures @ proxy.values).max()) - 1e-6


def test_maximize_worst_case_beats_deterministic_policies():
    for seed in (66, 67):
        mdp = tiny_random_mdp(3, 2, gamma=0.85, seed=seed)
        poly = build_polytope(mdp)
        proxy = _random_reward(mdp, seed)
        theta = 0.6
        pol = maximize_worst_case(mdp, poly, proxy, theta)
        eta = occupancy_measure(mdp, pol).values
        score = worst_case_value(poly, proxy, theta, eta)
        _, measures = enumerate_vertices(mdp)
        for vertex in measures:
            assert score >= worst_case_value(poly, proxy, theta, vertex) - 1e-4


def test_worst_case_objective_is_concave_along_segments():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=68)
    poly = build_polytope(mdp)
    proxy = _random_reward(mdp, 68)
    theta = 0.5
    _, measures = enumerate_vertices(mdp)
    a, b = measures[0], measures[-1]
    ts = np.linspace(0.0, 1.0, 21)
    vals = np.array(
        [worst_case_value(poly, proxy, theta, (1 - t) * a + t * b) for t in ts]
    )
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert second.max() <= 1e-8


def test_polytope_diameter_matches_pairwise_enumeration():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=69)
    poly = build_polytope(mdp)
    _, measures = enumerate_vertices(mdp)
    best = 0.0
    for i in range(len(measures)):
        for j in range(i + 1, len(measures)):
            best = max(best, float(np.linalg.norm(measures[i] - measures[j])))
    assert np.isclose(polytope_diameter(poly), best, atol=1e-9)


def test_regret_bound_zero_step_path_is_diameter():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=70)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 70)
    _, path = early_stopping(mdp, poly, r, EarlyStopConfig(angle_bound=np.pi / 2))
    assert np.isclose(regret_bound(poly, path, np.pi / 2, mdp.discount), polytope_diameter(poly))


def test_regret_bound_holds_on_seeded_triples():
    count = 0
    for seed in range(25):
        mdp = tiny_random_mdp(3, 2, gamma=0.85, seed=300 + seed)
        poly = build_polytope(mdp)
        rng = np.random.default_rng(seed)
        proxy_raw = _random_reward(mdp, 400 + seed)
        norm = np.linalg.norm(poly.projected(proxy_raw))
        proxy = RewardVector(proxy_raw.values / norm)
        theta = float(rng.uniform(0.1, 1.2))
        angle = float(rng.uniform(0.0, theta))
        true = sample_reward_at_angle(poly, proxy, angle, m=1.0, seed=seed)
        _, path = early_stopping(mdp, poly, proxy, EarlyStopConfig(angle_bound=theta))
        _, measures = enumerate_vertices(mdp)
        regret = float((measures @ true.values).max() - path.final @ true.values)
        assert regret <= regret_bound(poly, path, theta, mdp.discount) + 1e-8
        count += 1
    assert count == 25


def test_truncate_path_noop_beyond_length():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=71)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 71)
    path = steepest_ascent(mdp, poly, r)
    assert truncate_path(path, path.num_steps + 5, StopReason.EARLY_STOP) is path
    cut = truncate_path(path, 1, StopReason.EARLY_STOP)
    assert cut.num_steps == 1
    assert cut.stop_reason is StopReason.EARLY_STOP


def test_iterative_improvement_immediate_oracle_matches_ascent():
    mdp = tiny_random_mdp(3, 2, gamma=0.9, seed=72)
    poly = build_polytope(mdp)
    r = _random_reward(mdp, 72)
    full = steepest_ascent(mdp, poly, r)
    res = iterative_improvement(mdp, poly, lambda i: (r, 0.0))
    assert res.converged
    assert res.oracle_calls == 1
    assert np.isclose(res.final_eta @ r.values, full.final @ r.values, atol=1e-8)


def test_iterative_improvement_geometric_decay_reaches_optimum():
    mdp = tiny_random_mdp(3, 2, gamma=0.85, seed=73)
    poly = build_polytope(mdp)
    target = _random_reward(mdp, 73)

    def oracle(i):
        theta = 0.8 / (2.0**i)
        if theta < 1e-6:
            return target, 0.0
        r = sample_reward_at_angle(poly, target, theta / 2.0, seed=i)
        return r, theta

    res = iterative_improvement(mdp, poly, oracle)
    assert res.converged
    _, measures = enumerate_vertices(mdp)
    best = float((measures @ target.values).max())
    assert res.final_eta @ target.values >= best - 1e-6
    # Retained steps never hurt the target reward.
    for seg in res.segments:
        pts = np.asarray(seg.points)
        assert np.all(np.diff(pts @ target.values) >= -1e-9)
