"""Stopping a proxy optimiser before it Goodharts, with a certificate.

The cliff gridworld makes the failure mode concrete: the true reward pays
out for reaching the goal without falling off the edge, while the proxy
blends in an unrelated sparsified objective, leaving it about a radian from
the truth in projected angle.  Steepest ascent on the proxy first climbs
the true return, then marches past its peak and gives back the climb.  The
angle stopping rule halts the same walk at the first step whose unit gain
on the projected proxy falls below sin(theta) times the proxy's projected
norm; every reward within angle theta of the proxy is monotone
non-decreasing along the retained prefix.  Here the certified stop also
finishes ahead of the run-to-convergence policy on the true reward itself.

Run with:  python3 demos/early_stopping_walkthrough.py
"""

import numpy as np

from goodhart import (
    EarlyStopConfig,
    build_polytope,
    early_stopping,
    interpolate,
    make_cliff,
    normalize_return_range,
    projected_angle,
    regret_bound,
    sample_reward,
    sparsify,
    steepest_ascent,
    stopping_certificate,
)
from goodhart.ascent import stop_bound_value

env = make_cliff(6, 0.5, 0.9)
poly = build_polytope(env.mdp)

true = sample_reward(env, "cliff", seed=1)
distractor = sparsify(sample_reward(env, "uniform", seed=10), 0.7, seed=60)
proxy = interpolate(true, distractor, 0.55)
theta = projected_angle(poly, true, proxy)
print(f"cliff 6x6, slip 0.5: projected angle true -> proxy = {theta:.4f} rad")
print()

# True returns are reported on the [0, 1] scale of the normalised reward.
true_norm, _ = normalize_return_range(poly, true)

full = steepest_ascent(env.mdp, poly, proxy)
fv = np.asarray(full.points) @ true_norm.values
peak = int(np.argmax(fv))
print(
    f"unconstrained ascent on the proxy: {full.num_steps} steps, true return "
    f"{fv[0]:.4f} -> peak {fv[peak]:.4f} at step {peak} -> final {fv[-1]:.4f}"
)
print(f"running to convergence gives back {fv[peak] - fv[-1]:.4f} of true return")
print()

policy, kept = early_stopping(env.mdp, poly, proxy, EarlyStopConfig(angle_bound=theta))
kv = np.asarray(kept.points) @ true_norm.values
print(
    f"certified stop: keeps {kept.num_steps} of {full.num_steps} steps, "
    f"true return {kv[-1]:.4f}, drop along the retained prefix "
    f"{kv.max() - kv[-1]:.2e} (provably zero)"
)
print(
    f"the stopped policy ends {kv[-1] - fv[-1]:+.4f} ahead of the converged "
    "one without ever seeing the true reward"
)
print()

# The rule itself is one comparison per step: unit gain against the bound.
goal = poly.projected(proxy)
bound = stop_bound_value(float(np.linalg.norm(goal)), theta)
k = kept.num_steps
print(f"stop bound sin(theta) * |proxy projection| = {bound:.4f}")
print(
    f"unit gains straddle it: step {k - 1} gains {full.step_gains[k - 1]:.4f}, "
    f"step {k} gains {full.step_gains[k]:.4f}"
)

# The certificate names the reason: past the stop, some reward inside the
# theta-cone strictly decreases along the step, so no optimiser bound to
# this proxy and angle budget should take it.
first_bad = stopping_certificate(poly, full.points[k], full.points[k + 1], proxy, theta)
first_good = stopping_certificate(poly, full.points[0], full.points[1], proxy, theta)
print(f"certificate fires at the first rejected step: {first_bad}")
print(f"certificate fires at the first retained step: {first_good}")
print()

# The worst-case regret guarantee is loose here: the retained walk is short,
# so the polytope diameter term dominates.
print(
    "regret bound for unit-projected-norm cone rewards: "
    f"{regret_bound(poly, kept, theta, env.mdp.discount):.3f} "
    f"(diameter fallback 2 / (1 - gamma) = {2 / (1 - env.mdp.discount):.0f})"
)
