"""Offline figure scripts for harmonic-mpc logs (CSV/JSON in, PNG/SVG out)."""
from .figures import plot_period_sweep, plot_timeseries, plot_trajectory
from .io import RunLog, SchemaError, read_log, read_summary, read_sweep

__all__ = [
    "RunLog",
    "SchemaError",
    "plot_period_sweep",
    "plot_timeseries",
    "plot_trajectory",
    "read_log",
    "read_summary",
    "read_sweep",
]
