"""Minimal tidy-table container with a deterministic CSV round-trip.

All floating point values are written with 17 significant digits so that
float64 values survive a write/read cycle exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

FLOAT_FMT = "%.17g"


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


@dataclass
class Table:
    """Column names plus rows of plain Python/numpy scalars."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError(
                    f"row width {len(row)} does not match {len(self.columns)} columns"
                )

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValidationError(
                f"row width {len(values)} does not match {len(self.columns)} columns"
            )
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format_value(v) for v in row])
        return path

    @classmethod
    def read_csv(cls, path) -> "Table":
        path = Path(path)
        with path.open("r", newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"{path}: empty CSV") from None
            rows = [tuple(row) for row in reader]
        return cls(tuple(header), rows)


def write_matrix_csv(path, matrix, labels) -> Path:
    """Square matrix CSV with a shared label header row and label column."""
    matrix = np.asarray(matrix)
    labels = list(labels)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError("write_matrix_csv expects a square matrix")
    if len(labels) != matrix.shape[0]:
        raise ValidationError("label count does not match matrix dimension")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([""] + labels)
        for label, row in zip(labels, matrix):
            writer.writerow([label] + [FLOAT_FMT % v for v in row])
    return path


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        labels = header[1:]
        rows = []
        for row in reader:
            rows.append([float(v) for v in row[1:]])
    matrix = np.asarray(rows, dtype=float)
    if matrix.shape != (len(labels), len(labels)):
        raise ValidationError(f"{path}: malformed matrix CSV")
    return matrix, labels


def write_vector_csv(path, values, column: str, index_column: str = "index") -> Path:
    table = Table((index_column, column))
    for i, v in enumerate(np.asarray(values).ravel()):
        table.append(i, float(v))
    return table.write_csv(path)
