"""Chart rendering; output format follows the file extension."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import PlotDataError, load_batched_series, load_series

ERROR_BAR_POINTS = 20
FOOTER = "Bars: ±1 sample standard deviation across batches"


def render_convergence_chart(summary_csv, out_image) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """One proportion-vs-round curve per algorithm; returns the plotted series."""
    series = load_series(summary_csv)
    fig, ax = plt.subplots(figsize=(8, 5))
    for label, (t, y) in series.items():
        ax.plot(t, y, label=label, linewidth=1.4)
    ax.set_xlabel("round")
    ax.set_ylabel("converge proportion")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("Convergence of learning agents")
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(out_image))
    plt.close(fig)
    return series


def render_error_bars(batch_csv, out_image) -> dict[str, dict[str, np.ndarray]]:
    """Per-algorithm mean curve with error bars across batches.

    Bars show one sample standard deviation over the batches at a
    decimated set of rounds; at least two batches are required.
    """
    nested = load_batched_series(batch_csv)
    stats: dict[str, dict[str, np.ndarray]] = {}
    for label, batches in nested.items():
        if len(batches) < 2:
            raise PlotDataError(
                f"algorithm {label!r} has {len(batches)} batch(es); need at least 2"
            )
        rounds = next(iter(batches.values()))[0]
        stack = np.vstack([y for _, y in batches.values()])
        stats[label] = {
            "t": rounds,
            "mean": stack.mean(axis=0),
            "std": stack.std(axis=0, ddof=1),
        }

    n = len(stats)
    cols = min(n, 4)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.8 * rows), squeeze=False)
    for ax in axes.flat[n:]:
        ax.set_visible(False)
    for ax, (label, s) in zip(axes.flat, stats.items()):
        marks = np.unique(np.linspace(0, s["t"].size - 1, ERROR_BAR_POINTS).astype(int))
        ax.plot(s["t"], s["mean"], linewidth=1.2)
        ax.errorbar(
            s["t"][marks], s["mean"][marks], yerr=s["std"][marks],
            fmt="none", ecolor="black", elinewidth=0.8, capsize=2,
        )
        ax.set_ylim(0.0, 1.05)
        ax.set_title(label, fontsize=10)
        ax.grid(alpha=0.3)
    fig.suptitle("Convergence across repeated batches")
    fig.text(0.5, 0.005, FOOTER, ha="center", fontsize=8)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    fig.savefig(Path(out_image))
    plt.close(fig)
    return stats
