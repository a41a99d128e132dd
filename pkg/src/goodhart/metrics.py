"""Scalar metrics that detect the rise-then-fall signature in training curves.

All metrics read the true-reward column ``f`` of a curve over its pressure
grid.  ``lambda_star`` is the grid pressure where ``f`` peaks, ties broken
toward the smallest pressure.  Integrals use the composite trapezoid rule on
the grid; nothing is interpolated or smoothed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .solvers import TrainingCurve

METRIC_NAMES = ("ndh", "si", "cacw", "lr", "rwi")
LAMBDA_STAR_FILTER = 0.3
CONSTANT_STD_TOL = 1e-12


def _peak_index(curve: TrainingCurve) -> int:
    if curve.true_returns.size == 0:
        raise ValidationError("empty curve")
    return int(np.argmax(curve.true_returns))


def lambda_star(curve: TrainingCurve) -> float:
    """Pressure at the curve's maximum true return (smallest on ties)."""
    return float(curve.pressures[_peak_index(curve)])


def ndh(curve: TrainingCurve) -> float:
    """Drop height: peak true return minus the final (full-pressure) value.

    Zero exactly when the maximum is attained at the end of the grid;
    positive values indicate a rise-then-fall curve.
    """
    f = curve.true_returns
    return float(f[_peak_index(curve)] - f[-1])


def si(curve: TrainingCurve) -> float:
    """Product of the trapezoid integrals of ``f`` left and right of the peak."""
    if curve.true_returns.size < 2:
        raise ValidationError("need at least 2 grid points")
    i = _peak_index(curve)
    lam, f = curve.pressures, curve.true_returns
    left = float(np.trapezoid(f[: i + 1], lam[: i + 1])) if i > 0 else 0.0
    right = float(np.trapezoid(f[i:], lam[i:])) if i < lam.size - 1 else 0.0
    return left * right


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    # Segments shorter than 3 points or constant in either coordinate give 0.
    if x.size < 3 or np.std(x) <= CONSTANT_STD_TOL or np.std(y) <= CONSTANT_STD_TOL:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def cacw(curve: TrainingCurve) -> float:
    """Correlation-anticorrelation score weighted by the peak position.

    ``-max(rho0, 0) * max(rho1, 0) * sqrt(ls * (1 - ls))`` where the rhos are
    Pearson correlations of ``(lambda, f)`` on the segments before and after
    the peak and ``ls`` is the peak pressure.
    """
    i = _peak_index(curve)
    lam, f = curve.pressures, curve.true_returns
    rho0 = _pearson(lam[: i + 1], f[: i + 1])
    rho1 = _pearson(lam[i:], f[i:])
    ls = float(lam[i])
    return -max(rho0, 0.0) * max(rho1, 0.0) * float(np.sqrt(ls * (1.0 - ls)))


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2 or np.std(x) <= CONSTANT_STD_TOL:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def lr(curve: TrainingCurve) -> float:
    """Negated product of the positive parts of the segment regression angles."""
    i = _peak_index(curve)
    lam, f = curve.pressures, curve.true_returns
    beta0 = float(np.arctan(_slope(lam[: i + 1], f[: i + 1])))
    beta1 = float(np.arctan(_slope(lam[i:], f[i:])))
    return -max(beta0, 0.0) * max(beta1, 0.0)


def rwi(curve: TrainingCurve, baseline: TrainingCurve) -> float:
    """Weighted integrals of ``|f - f0|`` against a baseline curve, multiplied.

    The left integral is weighted by ``1 - ls`` and the right by its inverse;
    a peak at the end of the grid gives 0 by convention.

    Raises:
        ValidationError: If the curves use different pressure grids.
    """
    if not np.allclose(curve.pressures, baseline.pressures, rtol=0.0, atol=1e-12):
        raise ValidationError("curves use different pressure grids")
    i = _peak_index(curve)
    lam = curve.pressures
    ls = float(lam[i])
    if 1.0 - ls <= 1e-12:
        return 0.0
    g = np.abs(curve.true_returns - baseline.true_returns)
    left = float(np.trapezoid(g[: i + 1], lam[: i + 1])) if i > 0 else 0.0
    right = float(np.trapezoid(g[i:], lam[i:])) if i < lam.size - 1 else 0.0
    return (1.0 - ls) * left * (right / (1.0 - ls))


@dataclass(frozen=True)
class MetricsReport:
    """The five curve metrics plus the peak pressure.

    ``rwi`` is None when no baseline curve was available.
    """

    ndh: float
    si: float
    cacw: float
    lr: float
    rwi: float | None
    lambda_star: float

    def __post_init__(self):
        if self.ndh < 0.0:
            raise ValidationError("ndh must be non-negative")

    def as_row(self) -> list:
        return [self.ndh, self.si, self.cacw, self.lr, self.rwi, self.lambda_star]


def compute_metrics(curve: TrainingCurve, baseline: TrainingCurve | None = None) -> MetricsReport:
    """Evaluates every metric on a curve; ``rwi`` needs the baseline."""
    return MetricsReport(
        ndh=ndh(curve),
        si=si(curve),
        cacw=cacw(curve),
        lr=lr(curve),
        rwi=rwi(curve, baseline) if baseline is not None else None,
        lambda_star=lambda_star(curve),
    )


@dataclass(frozen=True)
class CorrelationResult:
    """Pearson correlations between metric columns over a report collection.

    Attributes:
        matrix: 5x5 array ordered ndh, si, cacw, lr, rwi; diagonal 1.
        constant_columns: Metric names whose column was constant; their
            off-diagonal correlations are recorded as 0.
        num_reports: Reports remaining after the peak-pressure filter.
    """

    matrix: np.ndarray
    constant_columns: tuple
    num_reports: int


def metric_correlations(
    reports: list, lambda_star_min: float = LAMBDA_STAR_FILTER
) -> CorrelationResult:
    """Correlates the five metrics over reports with a clear interior peak.

    Reports with ``lambda_star`` at or below the filter are dropped first,
    mirroring the aggregation the metrics were designed for.

    Raises:
        ValidationError: If fewer than two reports survive the filter.
    """
    kept = [r for r in reports if r.lambda_star > lambda_star_min]
    if len(kept) < 2:
        raise ValidationError("need at least 2 reports after the lambda-star filter")
    cols = np.array(
        [[r.ndh, r.si, r.cacw, r.lr, 0.0 if r.rwi is None else r.rwi] for r in kept]
    )
    stds = cols.std(axis=0)
    constant = tuple(METRIC_NAMES[j] for j in range(5) if stds[j] <= CONSTANT_STD_TOL)
    matrix = np.eye(5)
    for a in range(5):
        for b in range(a + 1, 5):
            if stds[a] <= CONSTANT_STD_TOL or stds[b] <= CONSTANT_STD_TOL:
                rho = 0.0
            else:
                rho = float(np.corrcoef(cols[:, a], cols[:, b])[0, 1])
            matrix[a, b] = matrix[b, a] = rho
    return CorrelationResult(matrix, constant, len(kept))
