"""Quantifying and provably preventing Goodharting in tabular MDPs.

The package models proxy-reward optimisation geometrically: policies live in
the occupancy-measure polytope, rewards act as linear functionals, and the
divergence between a true and a proxy reward is their angle after projecting
onto the polytope's span.  On top of that sit training-curve metrics for
Goodhart's law, an exact steepest-ascent optimiser with a provably safe
early-stopping criterion, a pessimistic worst-case optimiser, environment
generators, and a deterministic experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    ConfigError,
    DegenerateRewardError,
    GoodhartError,
    InfeasibleMeasureError,
    NoWitnessError,
    SolverFailureError,
    ValidationError,
)
from .mdp import (
    OccupancyMeasure,
    Policy,
    RewardVector,
    TabularMdp,
    deterministic_policy,
    flow_residual,
    occupancy_measure,
    policy_from_occupancy,
    policy_return,
    reward_from_table,
    rollout_occupancy,
    uniform_policy,
    validate_mdp,
)
from .geometry import (
    PolytopeModel,
    WorstCaseSpec,
    adversarial_reward,
    build_polytope,
    constraint_matrix,
    enumerate_vertices,
    normalize_return_range,
    potential_shaping,
    projected_angle,
    sample_reward_at_angle,
    starc_normalize,
)
from .solvers import (
    BR,
    MCE,
    PressureSchedule,
    SolverConfig,
    TrainingCurve,
    ValueIterationResult,
    boltzmann_policy,
    exact_config,
    extreme_returns,
    mce_policy,
    pressure_grid,
    read_curve_csv,
    solve_policy,
    training_curve,
    value_iteration,
    write_curve_csv,
)
from .ascent import (
    AscentPath,
    EarlyStopConfig,
    ImprovementConfig,
    ImprovementResult,
    StopReason,
    early_stopping,
    first_unsafe_step,
    iterative_improvement,
    maximize_worst_case,
    path_summary,
    polytope_diameter,
    regret_bound,
    steepest_ascent,
    stopping_certificate,
    tangent_direction,
    truncate_path,
    worst_case_value,
    write_path_csv,
)
from .envs import (
    Env,
    EnvSpec,
    ProxySpec,
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
from .metrics import (
    CorrelationResult,
    MetricsReport,
    cacw,
    compute_metrics,
    lambda_star,
    lr,
    metric_correlations,
    ndh,
    rwi,
    si,
)
from .harness import (
    Dataset,
    ExperimentConfig,
    RunRecord,
    averaged_distance_curves,
    desk_distance,
    desk_eval,
    desk_prevalence,
    export,
    fraction_by_distance,
    goodhart_fraction,
    import_dataset,
    mean_lost_fraction,
    run_demo_m22,
    run_distance_protocol,
    run_early_stopping_eval,
    run_prevalence,
)

__all__ = [name for name in dir() if not name.startswith("_")]
