"""CSV loading with explicit, named validation errors."""

from __future__ import annotations

import csv
from pathlib import Path


class FigureInputError(ValueError):
    """An input file is missing, or lacks a required column."""


class Table:
    """A loaded CSV: raw string cells by column, with float views on demand.

    Values are kept as the exact strings found in the file so annotations can
    quote them verbatim; ``floats()`` parses a column, treating empty cells
    as NaN.
    """

    def __init__(self, path: Path, columns: dict[str, list[str]]):
        self.path = path
        self.columns = columns

    def __len__(self) -> int:
        first = next(iter(self.columns.values()), [])
        return len(first)

    def strings(self, name: str) -> list[str]:
        return self.columns[name]

    def floats(self, name: str) -> list[float]:
        return [float(v) if v != "" else float("nan") for v in self.columns[name]]

    def rows(self) -> list[dict[str, str]]:
        names = list(self.columns)
        return [
            {name: self.columns[name][i] for name in names}
            for i in range(len(self))
        ]


def load_table(path: Path, required: tuple[str, ...]) -> Table:
    if not path.is_file():
        raise FigureInputError(f"required input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureInputError(f"{path.name} is empty") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise FigureInputError(
                f"{path.name} is missing required column(s): "
                + ", ".join(missing)
            )
        columns: dict[str, list[str]] = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                columns[name].append(value)
    return Table(path, columns)
