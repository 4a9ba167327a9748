"""Shared machinery for the figure scripts.

Every figure is a pure function of its input CSVs: fixed size, fixed fonts,
no timestamps, so re-rendering identical inputs produces identical bytes.
The primary package is never imported; CSV files are the only interface.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120
PNG_METADATA = {"Software": "flowexec-plots"}


class SchemaError(Exception):
    """An input CSV is missing, empty, or lacks a required column."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple
    output: Path


def read_csv(path, required):
    """Load a CSV into {column: array}; floats where the column parses."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def save(fig, spec: FigureSpec):
    fig.savefig(spec.output, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return Path(spec.output)


def new_figure(width=7.0, height=4.5, panels=1, sharex=False):
    fig, axes = plt.subplots(1, panels, figsize=(width, height), sharex=sharex)
    return fig, axes


def groups(data, key):
    """Iterate (label, row mask) over the distinct values of a column,
    preserving first-appearance order."""
    col = data[key]
    seen = []
    for v in col:
        if v not in seen:
            seen.append(v)
    for v in seen:
        yield v, col == v
