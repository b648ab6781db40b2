"""Observation matrices, CSV loading, standardization and column moments."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

Source = Union[str, os.PathLike, bytes, IO]


class DataError(ValueError):
    """Invalid input matrix. ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x p`` matrix whose rows are i.i.d. observations."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got {values.ndim} dimensions")
        n, p = values.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got n={n}")
        if p < 2:
            raise DataError(f"need at least 2 variables, got p={p}")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            k, i = bad[0]
            raise DataError("non-finite entry", row=int(k) + 1, column=int(i) + 1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]


@dataclass(frozen=True)
class ColumnMoments:
    """Per-column mean, variance (divisor n) and fourth central moment."""

    mean: np.ndarray
    var: np.ndarray
    m4: np.ndarray


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return fh.read()
    text = source.read()
    return text.decode("utf-8") if isinstance(text, bytes) else text


def load_matrix(source: Source, rows_are_observations: bool = True) -> DataMatrix:
    """Parse a comma-separated numeric table.

    A first row in which no cell parses as a number is taken as a header.
    Empty cells, non-numeric cells and ragged rows raise :class:`DataError`
    with the 1-based file row and column of the offending cell.
    """
    rows = list(csv.reader(io.StringIO(_read_text(source))))
    # line numbers are 1-based positions in the file; blank lines are skipped
    numbered = [(k + 1, r) for k, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise DataError("empty table")
    first_line, first = numbered[0]
    if not any(_is_number(c) for c in first):
        numbered = numbered[1:]
    if not numbered:
        raise DataError("table has a header but no data rows")

    width = len(numbered[0][1])
    out = np.empty((len(numbered), width))
    for r, (line, cells) in enumerate(numbered):
        if len(cells) != width:
            raise DataError(f"ragged row: expected {width} cells, found {len(cells)}", row=line)
        for c, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                raise DataError("missing value", row=line, column=c + 1)
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r}", row=line, column=c + 1) from None
            if not np.isfinite(out[r, c]):
                raise DataError(f"non-finite cell {cell!r}", row=line, column=c + 1)
    if not rows_are_observations:
        out = out.T
    return DataMatrix(out)


def write_matrix(X: DataMatrix, target: Union[str, os.PathLike, IO]) -> None:
    """Write ``X`` as CSV using shortest round-trip float formatting."""
    lines = "\n".join(",".join(repr(float(v)) for v in row) for row in X.values) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        target.write(lines)


def standardize(X: DataMatrix) -> DataMatrix:
    """Center each column and scale it to unit variance (divisor ``n``)."""
    values = X.values
    mean = values.mean(axis=0)
    centered = values - mean
    var = np.mean(centered**2, axis=0)
    flat = np.flatnonzero(~(var > 0))
    if len(flat):
        raise DataError("constant column has zero variance", column=int(flat[0]) + 1)
    return DataMatrix(centered / np.sqrt(var))


def column_moments(X: DataMatrix) -> ColumnMoments:
    values = X.values
    mean = values.mean(axis=0)
    centered = values - mean
    sq = centered**2
    return ColumnMoments(mean=mean, var=sq.mean(axis=0), m4=(sq**2).mean(axis=0))
