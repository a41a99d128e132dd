"""Deterministic figure rendering for goodhart sweep exports.

Reads the documented CSV schemas (runs.csv plus per-run curve files and
metadata sidecars) and renders five figure kinds through ``render`` or the
``plot --spec <json>`` console script. Nothing here imports the sweep
package; the CSV files are the whole interface.
"""

from .data import CURVE_COLUMNS, RUNS_COLUMNS, read_curve, read_runs, read_sidecar
from .errors import PlotsError, SchemaError
from .render import METRIC_NAMES, aggregate_theta, build_figure, render
from .spec import DEFAULT_BUCKET_COUNT, KINDS, PlotSpec, load_spec

__all__ = [
    "CURVE_COLUMNS",
    "DEFAULT_BUCKET_COUNT",
    "KINDS",
    "METRIC_NAMES",
    "PlotSpec",
    "PlotsError",
    "RUNS_COLUMNS",
    "SchemaError",
    "aggregate_theta",
    "build_figure",
    "load_spec",
    "read_curve",
    "read_runs",
    "read_sidecar",
    "render",
]
