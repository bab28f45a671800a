"""Render contextual bandit experiment CSV logs into figures.

The package is presentation only: it reads the delimited files the bandit
CLI documents (run, sweep, diag, and aggregate outputs), draws one of three
figure kinds, and never recomputes a statistic that an input file carries.
"""

from .csvio import FigureInputError, SchemaError, read_columns
from .render import KINDS, render, render_cdf, render_performance, render_width

__all__ = [
    "FigureInputError",
    "KINDS",
    "SchemaError",
    "read_columns",
    "render",
    "render_cdf",
    "render_performance",
    "render_width",
]
