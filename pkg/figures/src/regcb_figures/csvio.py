"""Schema-checked reading of the bandit CLI's delimited outputs."""

import csv
import os


class FigureInputError(Exception):
    """An input file is unusable for the requested figure."""


class SchemaError(FigureInputError):
    """A file exists but its header lacks required columns."""

    def __init__(self, path: str, missing):
        self.path = path
        self.missing = list(missing)
        super().__init__(f"{path}: missing columns {self.missing}")


def read_columns(path: str, required) -> dict:
    """Read a delimited file into {column name: list of raw strings}.

    Raises SchemaError naming every absent required column; extra columns
    pass through untouched. The file is opened read-only and never written.
    """
    if not os.path.exists(path):
        raise FigureInputError(f"cannot read {path}: file does not exist")
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, required) from None
        missing = [name for name in required if name not in header]
        if missing:
            raise SchemaError(path, missing)
        columns = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def floats(cells) -> list:
    return [float(cell) for cell in cells]
