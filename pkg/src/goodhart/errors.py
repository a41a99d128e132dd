"""Exception types shared across the package."""


class GoodhartError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(GoodhartError):
    """An input object violates a structural precondition."""


class ConfigError(GoodhartError):
    """A configuration value is malformed or out of range."""


class DegenerateRewardError(GoodhartError):
    """A reward is constant over the feasible set and cannot be normalised."""


class InfeasibleMeasureError(GoodhartError):
    """A vector is not a valid occupancy measure for the given MDP."""


class NoWitnessError(GoodhartError):
    """No adversarial reward exists inside the requested angular cone."""


class BudgetExceededError(GoodhartError):
    """An iteration or oracle-call budget was exhausted before convergence."""


class SolverFailureError(GoodhartError):
    """An internal numerical routine failed to converge."""
