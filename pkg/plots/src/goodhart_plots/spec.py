"""Plot specifications: which figure to draw from which exports."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import PlotsError, SchemaError

KINDS = ("curves", "lost_reward_box", "theta_scatter", "angle_tracks", "corr_heatmap")

DEFAULT_BUCKET_COUNT = 25
DEFAULT_DPI = 150


@dataclass(frozen=True)
class PlotSpec:
    """One figure request.

    Attributes:
        kind: Figure kind, one of ``KINDS``.
        inputs: Paths to runs.csv files; curve files are resolved from the
            sibling ``curves/`` directory of each.
        output: Image path to write (the extension picks the format).
        bucket_count: Number of equal-width buckets for angle aggregation.
        dpi: Raster resolution.
        title: Optional figure title.
    """

    kind: str
    inputs: tuple
    output: str
    bucket_count: int = DEFAULT_BUCKET_COUNT
    dpi: int = DEFAULT_DPI
    title: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.kind not in KINDS:
            raise PlotsError(f"unknown figure kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise PlotsError("inputs must list at least one runs.csv path")
        if self.bucket_count < 1:
            raise PlotsError("bucket_count must be at least 1")
        if self.dpi < 1:
            raise PlotsError("dpi must be at least 1")
        for path in self.inputs:
            if not os.path.exists(path):
                raise SchemaError(f"{path}: no such file")


def load_spec(path) -> PlotSpec:
    """Reads a PlotSpec from a JSON file.

    The JSON object needs ``kind``, ``inputs`` and ``output``; the styling
    keys ``bucket_count``, ``dpi`` and ``title`` are optional.

    Raises:
        PlotsError: On unreadable JSON or unknown keys.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlotsError(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise PlotsError(f"{path}: spec must be a JSON object")
    allowed = {"kind", "inputs", "output", "bucket_count", "dpi", "title"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise PlotsError(f"{path}: unknown spec keys: {', '.join(unknown)}")
    for name in ("kind", "inputs", "output"):
        if name not in data:
            raise PlotsError(f"{path}: spec needs the key {name!r}")
    return PlotSpec(
        kind=data["kind"],
        inputs=tuple(data["inputs"]),
        output=data["output"],
        bucket_count=int(data.get("bucket_count", DEFAULT_BUCKET_COUNT)),
        dpi=int(data.get("dpi", DEFAULT_DPI)),
        title=data.get("title"),
    )
