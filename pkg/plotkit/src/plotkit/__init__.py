"""Deterministic figure rendering for dotkmc simulation CSV files."""

from .render import FIGURE_KINDS, FigureRecipe, render
from .schemas import SCHEMAS, SchemaError, identify, read_table

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureRecipe",
    "render",
    "SCHEMAS",
    "SchemaError",
    "identify",
    "read_table",
    "__version__",
]
