"""CSV schemas produced by the simulator CLI, and strict readers for them.

Files are accepted only when their header matches a documented schema
exactly; anything else is refused so that a stale or foreign file can never
render a silently wrong figure.
"""

from __future__ import annotations

import csv

__all__ = ["SchemaError", "SCHEMAS", "read_table", "identify"]


class SchemaError(ValueError):
    """A CSV file does not match the documented column layout."""


#: schema name -> exact header tuple
SCHEMAS = {
    "decay": ("t_ns", "counts", "normalized"),
    "decay_analytic": ("t_ns", "normalized"),
    "g2": ("tau_ns", "raw", "normalized"),
    "blink": ("run_length_periods", "count"),
    "blink_fit": (
        "order",
        "a_fast",
        "gamma_fast_per_period",
        "a_slow",
        "gamma_slow_per_period",
        "residual",
    ),
    "sweep": (
        "gamma_nr",
        "gamma_sf",
        "purcell",
        "period_t",
        "p_in",
        "scheme",
        "class",
        "p_out",
        "stderr",
        "cycles",
        "seed",
    ),
}

#: columns kept as strings (everything else parses as float, "" -> None)
_TEXT_COLUMNS = {"scheme", "class"}


def identify(path: str) -> str:
    """Schema name of a CSV file, from its header line."""
    with open(path, newline="") as fh:
        header = tuple(next(csv.reader(fh), ()))
    for name, columns in SCHEMAS.items():
        if header == columns:
            return name
    raise SchemaError(f"{path}: header {','.join(header)!r} matches no known schema")


def read_table(path: str, expect: str | None = None) -> tuple[str, dict[str, list]]:
    """Read a CSV into columns; returns (schema name, {column: values}).

    ``expect`` restricts the accepted schema. Numeric columns are floats;
    empty cells become None.
    """
    name = identify(path)
    if expect is not None and name != expect:
        raise SchemaError(f"{path}: expected a {expect!r} file, found {name!r}")
    columns = SCHEMAS[name]
    table: dict[str, list] = {c: [] for c in columns}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header, already validated
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise SchemaError(
                    f"{path}:{line_no}: expected {len(columns)} fields, got {len(row)}"
                )
            for column, cell in zip(columns, row):
                if column in _TEXT_COLUMNS:
                    table[column].append(cell)
                elif cell == "":
                    table[column].append(None)
                else:
                    try:
                        table[column].append(float(cell))
                    except ValueError:
                        raise SchemaError(
                            f"{path}:{line_no}: column {column!r}: "
                            f"not a number: {cell!r}"
                        ) from None
    return name, table
