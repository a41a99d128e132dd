"""Readers for the sweep export schemas.

A sweep export is a directory holding ``runs.csv`` plus per-run curve files
``curves/<run_id>.csv`` with JSON metadata sidecars ``curves/<run_id>.json``.
The column lists below are the documented contract of those files; readers
validate headers exactly and name any mismatch.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import SchemaError

RUNS_COLUMNS = (
    "run_id",
    "protocol",
    "config_fingerprint",
    "family",
    "env",
    "discount",
    "sigma",
    "reward_kind",
    "t",
    "distance",
    "method",
    "theta",
    "cell_seed",
    "status",
    "reason",
    "ndh",
    "si",
    "cacw",
    "lr",
    "rwi",
    "lambda_star",
    "stop_index",
    "retained_return",
    "retained_ndh",
    "lost_fraction",
    "regret_bound",
)

CURVE_COLUMNS = ("lambda", "true_return", "proxy_return")

_OPTIONAL_FLOATS = (
    "t",
    "distance",
    "theta",
    "ndh",
    "si",
    "cacw",
    "lr",
    "rwi",
    "lambda_star",
    "retained_return",
    "retained_ndh",
    "lost_fraction",
    "regret_bound",
)


def _check_header(header, expected, path) -> None:
    if tuple(header) == tuple(expected):
        return
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    parts = []
    if missing:
        parts.append(f"missing columns: {', '.join(missing)}")
    if extra:
        parts.append(f"unexpected columns: {', '.join(extra)}")
    if not parts:
        parts.append("columns out of order")
    raise SchemaError(f"{path}: " + "; ".join(parts))


def _opt_float(value: str):
    return None if value == "" else float(value)


def read_runs(path) -> list:
    """Reads one runs.csv into row dicts with numeric fields parsed.

    Optional fields come back as None when the cell is empty.

    Args:
        path: Path to a runs.csv file.

    Returns:
        One dict per data row, keys matching ``RUNS_COLUMNS``.

    Raises:
        SchemaError: If the file is missing, the header does not match the
            documented columns, or the table holds no runs.
    """
    if not os.path.exists(path):
        raise SchemaError(f"{path}: no such file")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, expected a runs.csv header")
        _check_header(header, RUNS_COLUMNS, path)
        for raw in reader:
            d = dict(zip(RUNS_COLUMNS, raw))
            d["discount"] = float(d["discount"])
            d["sigma"] = float(d["sigma"])
            for name in _OPTIONAL_FLOATS:
                d[name] = _opt_float(d[name])
            d["stop_index"] = None if d["stop_index"] == "" else int(d["stop_index"])
            rows.append(d)
    if not rows:
        raise SchemaError(f"{path}: contains no runs")
    return rows


def ok_rows(rows: list) -> list:
    """The subset of rows whose status is ok."""
    return [r for r in rows if r["status"] == "ok"]


def curve_path(runs_csv, run_id: str) -> str:
    """Path of a run's curve file next to its runs.csv."""
    return os.path.join(os.path.dirname(os.path.abspath(runs_csv)), "curves", f"{run_id}.csv")


def sidecar_path(runs_csv, run_id: str) -> str:
    """Path of a run's curve metadata sidecar next to its runs.csv."""
    return os.path.join(os.path.dirname(os.path.abspath(runs_csv)), "curves", f"{run_id}.json")


def read_curve(path) -> tuple:
    """Reads one curve CSV.

    Returns:
        Arrays (pressures, true_returns, proxy_returns).

    Raises:
        SchemaError: If the file is missing or the header does not match.
    """
    if not os.path.exists(path):
        raise SchemaError(f"{path}: no such file")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, expected a curve header")
        _check_header(header, CURVE_COLUMNS, path)
        for raw in reader:
            rows.append([float(x) for x in raw])
    arr = np.array(rows) if rows else np.zeros((0, 3))
    return arr[:, 0], arr[:, 1], arr[:, 2]


def read_sidecar(path) -> dict:
    """Reads a curve metadata sidecar; missing files give an empty dict."""
    if not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh)
