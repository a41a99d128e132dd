"""Shared fixtures: real sweep exports for the figure tests to consume."""

import pytest

from goodhart import EnvSpec, ExperimentConfig, export, run_demo_m22, run_early_stopping_eval


@pytest.fixture(scope="session")
def m22_export(tmp_path_factory):
    out = tmp_path_factory.mktemp("exports") / "m22"
    export(run_demo_m22(), out)
    return str(out / "runs.csv")


@pytest.fixture(scope="session")
def eval_export(tmp_path_factory):
    cfg = ExperimentConfig(
        environments=(
            EnvSpec("gridworld", {"n": 3}),
            EnvSpec("cliff", {"n": 4, "p": 0.5}),
        ),
        reward_kinds={"gridworld": ("terminal",), "cliff": ("cliff",)},
        gammas=(0.9,),
        sigmas=(0.1, 0.4),
        pressures={"kind": "linspace", "low": 0.01, "high": 0.99, "count": 8},
        proxies_per_run=4,
        seed=3,
    )
    out = tmp_path_factory.mktemp("exports") / "eval"
    export(run_early_stopping_eval(cfg), out)
    return str(out / "runs.csv")
