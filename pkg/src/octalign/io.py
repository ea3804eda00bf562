"""Comma-separated table emission and parsing.

Every emitted file is a numeric table with a single header row.  Field
samples are written with 17 significant digits, which round-trips IEEE
doubles exactly; iteration logs use 6 digits.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import FileFormatError
from .propagate import FieldGrid, TimeGrid

FIELD_FMT = "%.17g"
LOG_FMT = "%.6g"


def write_table(path, header, columns, fmt=FIELD_FMT):
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns):
        raise ValueError("one header entry per column required")
    n = columns[0].shape[0]
    for c in columns:
        if c.shape != (n,):
            raise ValueError("all columns must have equal length")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(fmt % c[i] for c in columns) + "\n")


def read_table(path, n_columns=None):
    """Parse a numeric table; returns (header, list of float arrays).

    Malformed rows are reported with their 1-based line number.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise FileFormatError(f"cannot read table: {err}")
    if not rows:
        raise FileFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    width = len(header) if n_columns is None else n_columns
    if len(header) != width:
        raise FileFormatError(
            f"{path}:1: expected {width} columns, found {len(header)}")
    columns = [[] for _ in range(width)]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise FileFormatError(
                f"{path}:{lineno}: expected {width} values, found {len(row)}")
        for k, cell in enumerate(row):
            try:
                columns[k].append(float(cell))
            except ValueError:
                raise FileFormatError(
                    f"{path}:{lineno}: not a number: {cell.strip()!r}")
    return header, [np.array(c) for c in columns]


def write_field(path, field: FieldGrid):
    t = np.arange(field.grid.n_steps + 1) * field.grid.dt
    write_table(path, ["t_au", "e_au"], [t, field.values])


def read_field(path) -> FieldGrid:
    """Rebuild a FieldGrid from a file written by write_field.

    The sample values come back bitwise identical; the grid is
    reconstructed from the last time stamp and the row count.
    """
    _, (t, e) = read_table(path, n_columns=2)
    if t.size < 2:
        raise FileFormatError(f"{path}: need at least two samples")
    grid = TimeGrid(t_f=float(t[-1]), n_steps=t.size - 1)
    return FieldGrid(grid, e)


def write_history(path, records):
    with open(path, "w", newline="") as fh:
        fh.write("k,cost,projection,fluence,mu,out_of_band\n")
        for r in records:
            fh.write("%d,%s,%s,%s,%s,%s\n" % (
                r.k, LOG_FMT % r.cost, LOG_FMT % r.projection,
                LOG_FMT % r.fluence, LOG_FMT % r.mu,
                LOG_FMT % r.out_of_band))


def write_trace(path, grid: TimeGrid, values):
    t = np.arange(grid.n_steps + 1) * grid.dt
    write_table(path, ["t_au", "cos2"], [t, values])


def write_spectrum(path, spectrum):
    amp = spectrum.amplitudes
    write_table(path, ["omega_au", "re", "im", "power"],
                [spectrum.frequencies, amp.real, amp.imag,
                 np.abs(amp) ** 2])
