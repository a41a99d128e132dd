"""A tour of the occupancy-measure geometry the whole package runs on.

Every stationary policy of a tabular MDP induces a discounted state-action
occupancy measure, and the set of all of them is a polytope: the affine flow
constraints A eta = mu intersected with the non-negative orthant.  Returns
are linear there (J = eta . r), which is why reward questions become
geometry questions.  This script builds the polytope for a small random MDP
and walks through the three facts the rest of the code leans on: reward
components orthogonal to the polytope's span are invisible, potential
shaping lives entirely in that invisible part, and the polytope's vertices
are exactly the deterministic policies.

Run with:  python3 demos/occupancy_geometry_tour.py
"""

import numpy as np

from goodhart import (
    RewardVector,
    build_polytope,
    enumerate_vertices,
    make_random_mdp,
    occupancy_measure,
    policy_return,
    potential_shaping,
    projected_angle,
    uniform_policy,
)

env = make_random_mdp(num_states=4, num_actions=2, num_terminal=1, gamma=0.9, seed=2)
mdp = env.mdp
poly = build_polytope(mdp)
print(
    f"random MDP: {mdp.num_states} states x {mdp.num_actions} actions, "
    f"polytope dimension {poly.dimension} = |S| (|A| - 1)"
)

# Fact 1: the flow constraints hold for every policy's measure, and the
# component (I - M) eta is the same constant for all of them.
rng = np.random.default_rng(0)
etas = []
for _ in range(3):
    probs = rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states)
    from goodhart import Policy

    etas.append(occupancy_measure(mdp, Policy(probs)).values)
fixed = [eta - poly.project(eta) for eta in etas]
spread = max(np.linalg.norm(f - fixed[0]) for f in fixed)
print(f"fixed (out-of-span) component varies by {spread:.2e} across policies")

# Fact 2: potential shaping shifts every policy's return by the same
# constant, so it can never change which policy wins; the projection treats
# shaped and unshaped rewards as the same direction.
base = RewardVector(rng.normal(size=mdp.num_pairs))
phi = rng.normal(size=mdp.num_states)
shaped = RewardVector(base.values + potential_shaping(mdp, phi).values)
pi_uniform = uniform_policy(mdp)
from goodhart import Policy

pi_random = Policy(rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states))
for name, pi in (("uniform", pi_uniform), ("random", pi_random)):
    shift = policy_return(mdp, shaped, pi) - policy_return(mdp, base, pi)
    print(f"shaping shifts the {name} policy's return by {shift:.6f}")
print(f"projected angle base -> shaped: {projected_angle(poly, base, shaped):.2e} rad")

# Fact 3: vertices are deterministic policies, and the best one is the
# linear-programming optimum of the return.
policies, measures = enumerate_vertices(mdp)
returns = measures @ base.values
best = int(np.argmax(returns))
print(
    f"{len(policies)} deterministic policies enumerate the vertices; "
    f"best return {returns[best]:.6f}"
)
print(
    "mixing never helps a linear objective: a random mixture scores "
    f"{float(etas[0] @ base.values):.6f}"
)
