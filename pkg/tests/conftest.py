"""Shared fixtures for the test suite; oracle helpers live in oracles.py."""

import pytest

from oracles import tiny_random_mdp


@pytest.fixture(scope="session")
def small_mdp_matrix() -> list:
    """The |S| <= 4, |A| <= 3 instances used by the optimality criteria."""
    mdps = []
    for ns in (2, 3, 4):
        for na in (2, 3):
            for seed in (0, 1):
                mdps.append(tiny_random_mdp(ns, na, gamma=0.9, seed=10 * ns + na + seed))
    mdps.append(tiny_random_mdp(3, 2, gamma=0.7, seed=7, num_terminal=1))
    mdps.append(tiny_random_mdp(4, 2, gamma=0.95, seed=11, num_terminal=1))
    return mdps
