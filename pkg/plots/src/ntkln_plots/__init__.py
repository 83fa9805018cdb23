"""Figure rendering for ntkln experiment CSVs.

This package performs no computation: every number it draws comes from the
CSV files emitted by the ntkln CLI.
"""

__version__ = "0.1.0"

from .render import PlotJob, SchemaError, render

__all__ = ["PlotJob", "SchemaError", "render"]
