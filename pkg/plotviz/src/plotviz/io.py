"""CSV loading for convergence summaries.

Files may carry ``#`` comment lines ahead of the header row.  Reading is
strict: every required column must be present by name and every data cell
must parse, so malformed inputs fail with a message naming the problem
instead of producing an empty chart.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class PlotDataError(ValueError):
    """The CSV cannot back the requested chart."""


def _read_table(path: Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    if not rows:
        raise PlotDataError(f"{path}: no header row")
    reader = csv.DictReader(rows)
    columns = reader.fieldnames or []
    for name in required:
        if name not in columns:
            raise PlotDataError(f"{path}: missing column {name!r}")
    data = list(reader)
    if not data:
        raise PlotDataError(f"{path}: no data rows")
    return data


def _number(row: dict[str, str], key: str, path: Path) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError) as exc:
        raise PlotDataError(f"{path}: column {key!r} has non-numeric value {row[key]!r}") from exc


def load_series(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-algorithm (round, proportion) series, algorithms in file order."""
    path = Path(path)
    data = _read_table(path, ("algorithm", "t", "converge_proportion"))
    series: dict[str, tuple[list, list]] = {}
    for row in data:
        t = _number(row, "t", path)
        y = _number(row, "converge_proportion", path)
        bucket = series.setdefault(row["algorithm"], ([], []))
        bucket[0].append(t)
        bucket[1].append(y)
    return {
        label: (np.asarray(ts), np.asarray(ys)) for label, (ts, ys) in series.items()
    }


def load_batched_series(path) -> dict[str, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Per-algorithm, per-batch (round, proportion) series."""
    path = Path(path)
    data = _read_table(path, ("algorithm", "batch", "t", "converge_proportion"))
    nested: dict[str, dict[str, tuple[list, list]]] = {}
    for row in data:
        t = _number(row, "t", path)
        y = _number(row, "converge_proportion", path)
        batches = nested.setdefault(row["algorithm"], {})
        bucket = batches.setdefault(row["batch"], ([], []))
        bucket[0].append(t)
        bucket[1].append(y)
    return {
        label: {
            batch: (np.asarray(ts), np.asarray(ys)) for batch, (ts, ys) in batches.items()
        }
        for label, batches in nested.items()
    }
