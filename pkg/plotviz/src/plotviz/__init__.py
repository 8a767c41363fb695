"""Render convergence-experiment CSVs as charts."""

__version__ = "0.1.0"

from .io import PlotDataError, load_batched_series, load_series
from .charts import render_convergence_chart, render_error_bars
