"""Figure builders for the five supported kinds, and deterministic saving."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "goodhart-plots"

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import Normalize

from .data import curve_path, ok_rows, read_curve, read_runs, read_sidecar, sidecar_path
from .errors import PlotsError
from .spec import PlotSpec

METRIC_NAMES = ("ndh", "si", "cacw", "lr", "rwi")

# Labels fit a legend up to this many curves; beyond it a colorbar applies.
LEGEND_LIMIT = 8

_DISTANCE_CMAP = "Blues"
_UNKNOWN_DISTANCE_COLOR = (0.6, 0.6, 0.6, 1.0)


def _distance_colors(distances: list) -> tuple:
    """Colour per distance, darker for a more distant proxy.

    Returns:
        (colors, norm): one RGBA per entry and the shared Normalize over the
        known distances, or norm None when no spread exists.
    """
    cmap = plt.get_cmap(_DISTANCE_CMAP)
    known = [d for d in distances if d is not None]
    lo = min(known) if known else 0.0
    hi = max(known) if known else 1.0
    spread = hi - lo > 1e-12
    colors = []
    for d in distances:
        if d is None:
            colors.append(_UNKNOWN_DISTANCE_COLOR)
        elif not spread:
            colors.append(cmap(0.8))
        else:
            colors.append(cmap(0.3 + 0.7 * (d - lo) / (hi - lo)))
    return colors, (Normalize(lo, hi) if known and spread else None)


def _finish(fig, ax, spec: PlotSpec, default_title: str) -> None:
    ax.set_title(spec.title if spec.title is not None else default_title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()


def _build_curves(spec: PlotSpec):
    entries = []
    for path in spec.inputs:
        for row in ok_rows(read_runs(path)):
            cpath = curve_path(path, row["run_id"])
            if not os.path.exists(cpath):
                continue
            lam, true_returns, _ = read_curve(cpath)
            entries.append((row, lam, true_returns))
    if not entries:
        raise PlotsError("no curve files found next to the given runs.csv inputs")
    colors, norm = _distance_colors([row["distance"] for row, _, _ in entries])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    small = len(entries) <= LEGEND_LIMIT
    for (row, lam, tr), color in zip(entries, colors):
        label = None
        if small:
            d = row["distance"]
            label = row["run_id"] if d is None else f"distance {d:.3f}"
        ax.plot(lam, tr, color=color, linewidth=1.2, label=label)
    ax.set_xlabel("optimisation pressure")
    ax.set_ylabel("normalised true return")
    if small:
        ax.legend(loc="best", fontsize=8)
    elif norm is not None:
        mappable = plt.cm.ScalarMappable(norm=norm, cmap=_DISTANCE_CMAP)
        fig.colorbar(mappable, ax=ax, label="projected distance (rad)")
    _finish(fig, ax, spec, "true return vs optimisation pressure")
    return fig


def _build_lost_box(spec: PlotSpec):
    groups: dict = {}
    for path in spec.inputs:
        for row in ok_rows(read_runs(path)):
            if row["lost_fraction"] is None:
                continue
            groups.setdefault(row["family"], []).append(row["lost_fraction"])
    if not groups:
        raise PlotsError(
            "no lost_fraction values in the inputs; this figure needs an early-stop export"
        )
    families = sorted(groups)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.boxplot([groups[f] for f in families], tick_labels=families, whis=(5, 95))
    ax.set_xlabel("environment family")
    ax.set_ylabel("true return lost at the certified stop")
    _finish(fig, ax, spec, "lost reward by family")
    return fig


def aggregate_theta(theta, values, bucket_count: int) -> tuple:
    """Equal-width bucket aggregation of ``values`` over the theta range.

    Args:
        theta: Angle per point.
        values: Value per point.
        bucket_count: Number of buckets spanning [min(theta), max(theta)].

    Returns:
        (centers, medians, lower, upper), each of length exactly
        ``bucket_count``; lower and upper are the 25th and 75th percentiles
        and empty buckets hold NaN.
    """
    theta = np.asarray(theta, dtype=float)
    values = np.asarray(values, dtype=float)
    if theta.size == 0:
        raise PlotsError("no points to aggregate")
    edges = np.linspace(theta.min(), theta.max() + 1e-12, bucket_count + 1)
    idx = np.clip(np.digitize(theta, edges) - 1, 0, bucket_count - 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    med = np.full(bucket_count, np.nan)
    low = np.full(bucket_count, np.nan)
    high = np.full(bucket_count, np.nan)
    for b in range(bucket_count):
        mask = idx == b
        if np.any(mask):
            med[b] = np.median(values[mask])
            low[b] = np.percentile(values[mask], 25.0)
            high[b] = np.percentile(values[mask], 75.0)
    return centers, med, low, high


def _build_theta_scatter(spec: PlotSpec):
    theta, lost = [], []
    for path in spec.inputs:
        for row in ok_rows(read_runs(path)):
            if row["theta"] is None or row["lost_fraction"] is None:
                continue
            theta.append(row["theta"])
            lost.append(row["lost_fraction"])
    if not theta:
        raise PlotsError(
            "no (theta, lost_fraction) pairs in the inputs; this figure needs an early-stop export"
        )
    centers, med, low, high = aggregate_theta(theta, lost, spec.bucket_count)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.scatter(theta, lost, s=6, color="0.75", label="runs", zorder=1)
    ax.fill_between(centers, low, high, color="tab:blue", alpha=0.25,
                    label="25th to 75th percentile", zorder=2)
    ax.plot(centers, med, color="tab:blue", linewidth=1.6, label="bucket median", zorder=3)
    ax.set_xlabel("stopping angle theta (rad)")
    ax.set_ylabel("true return lost at the certified stop")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, ax, spec, "lost reward vs stopping angle")
    return fig


def _build_angle_tracks(spec: PlotSpec):
    entries = []
    for path in spec.inputs:
        for row in ok_rows(read_runs(path)):
            meta = read_sidecar(sidecar_path(path, row["run_id"]))
            track = meta.get("cos_angle_track")
            if track is None:
                continue
            lam, _, _ = read_curve(curve_path(path, row["run_id"]))
            angles = np.arccos(np.clip(np.asarray(track, dtype=float), -1.0, 1.0))
            entries.append((row, lam, angles))
    if not entries:
        raise PlotsError(
            "no cos_angle_track metadata in the inputs; this figure needs angle-tracked sweeps"
        )
    colors, _ = _distance_colors([row["distance"] for row, _, _ in entries])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    small = len(entries) <= LEGEND_LIMIT
    threshold_labelled = False
    for (row, lam, angles), color in zip(entries, colors):
        label = None
        if small:
            d = row["distance"]
            label = row["run_id"] if d is None else f"distance {d:.3f}"
        ax.plot(lam, angles, color=color, linewidth=1.2, label=label)
        if row["theta"] is not None:
            tlabel = None if threshold_labelled else "critical angle pi/2 - theta"
            threshold_labelled = True
            ax.axhline(np.pi / 2.0 - row["theta"], color=color, linestyle="--",
                       linewidth=0.8, label=tlabel)
    ax.set_xlabel("optimisation pressure")
    ax.set_ylabel("angle between displacement and projected proxy (rad)")
    if small or threshold_labelled:
        ax.legend(loc="best", fontsize=8)
    _finish(fig, ax, spec, "trajectory angle vs optimisation pressure")
    return fig


def _build_corr_heatmap(spec: PlotSpec):
    columns: dict = {m: [] for m in METRIC_NAMES}
    for path in spec.inputs:
        for row in ok_rows(read_runs(path)):
            if any(row[m] is None for m in METRIC_NAMES):
                continue
            for m in METRIC_NAMES:
                columns[m].append(row[m])
    count = len(columns[METRIC_NAMES[0]])
    if count < 3:
        raise PlotsError(
            "need at least 3 rows with all metric values for a correlation heatmap"
        )
    mat = np.array([columns[m] for m in METRIC_NAMES])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(mat)
    # Constant metrics have no defined correlation; shown as 0.
    corr = np.where(np.isfinite(corr), corr, 0.0)
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    image = ax.imshow(corr, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    ax.set_xticks(range(len(METRIC_NAMES)), METRIC_NAMES)
    ax.set_yticks(range(len(METRIC_NAMES)), METRIC_NAMES)
    for i in range(len(METRIC_NAMES)):
        for j in range(len(METRIC_NAMES)):
            shade = "white" if abs(corr[i, j]) > 0.6 else "black"
            ax.text(j, i, f"{corr[i, j]:.2f}", ha="center", va="center",
                    fontsize=8, color=shade)
    fig.colorbar(image, ax=ax, label="Pearson correlation")
    ax.set_title(spec.title if spec.title is not None else
                 f"metric correlations over {count} runs")
    fig.tight_layout()
    return fig


_BUILDERS = {
    "curves": _build_curves,
    "lost_reward_box": _build_lost_box,
    "theta_scatter": _build_theta_scatter,
    "angle_tracks": _build_angle_tracks,
    "corr_heatmap": _build_corr_heatmap,
}

_PINNED_METADATA = {
    ".png": {"Software": "goodhart-plots"},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None},
}


def build_figure(spec: PlotSpec):
    """Builds the matplotlib figure for a spec without saving it.

    The caller owns the figure and should close it.

    Raises:
        SchemaError: If an input file is missing or malformed.
        PlotsError: If the inputs hold no data for the requested kind.
    """
    return _BUILDERS[spec.kind](spec)


def render(spec: PlotSpec) -> str:
    """Renders a spec to its output image and returns the output path.

    Inputs are read and validated before anything is written, so a failing
    render leaves no file behind.  Bytes depend only on the input files and
    the installed library versions: image metadata that would normally
    carry a timestamp is pinned and nothing draws from a clock or an
    unseeded generator.
    """
    fig = build_figure(spec)
    try:
        out_dir = os.path.dirname(os.path.abspath(spec.output))
        os.makedirs(out_dir, exist_ok=True)
        ext = os.path.splitext(spec.output)[1].lower()
        fig.savefig(spec.output, dpi=spec.dpi, metadata=_PINNED_METADATA.get(ext))
    finally:
        plt.close(fig)
    return spec.output
