"""Tabular data ingestion and preprocessing.

Tables are plain row-major lists of cells. A cell is one of:

* ``None``            -- missing value
* ``float``           -- continuous value (raw or z-scored)
* ``str``             -- categorical value before encoding
* ``int``             -- categorical index after encoding, or a key value

Preprocessing follows a fixed order: drop incomplete rows, encode
categoricals ordinally, z-score continuous columns against training-split
statistics, then shuffle and split.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
KEY = "key"  # integer identifier column; never encoded, normalized or modeled

CLASSIFICATION = "classification"
REGRESSION = "regression"

SCHEMA_VERSION = 1

# Substrings that collide with the sentence codec's clause delimiters.
_FORBIDDEN = (", ", " is ")


def _parse_number(text):
    """Return the cell's float value, or None if it is not a finite number."""
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


@dataclass
class ColumnSpec:
    name: str
    kind: str
    categories: list[str] | None = None
    mean: float | None = None
    std_dev: float | None = None
    zero_variance: bool = False

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS, KEY):
            raise ValueError(f"unknown column kind {self.kind!r}")
        for bad in _FORBIDDEN:
            if bad in self.name:
                raise ValueError(f"column name {self.name!r} contains {bad!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise ValueError(f"categorical column {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise ValueError(f"duplicate categories in column {self.name!r}")
            for value in self.categories:
                for bad in _FORBIDDEN:
                    if bad in value:
                        raise ValueError(
                            f"category {value!r} in column {self.name!r} contains {bad!r}"
                        )
        if self.std_dev is not None and self.std_dev < 0:
            raise ValueError("std_dev must be >= 0")


@dataclass
class TableSchema:
    columns: list[ColumnSpec]
    target_column: str
    task: str

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        if self.target_column not in names:
            raise ValueError(f"target column {self.target_column!r} not in schema")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")
        target = self.column(self.target_column)
        if self.task == CLASSIFICATION and target.kind != CATEGORICAL:
            raise ValueError("classification target must be categorical")
        if self.task == REGRESSION and target.kind != CONTINUOUS:
            raise ValueError("regression target must be continuous")

    def column(self, name: str) -> ColumnSpec:
        for spec in self.columns:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, spec in enumerate(self.columns):
            if spec.name == name:
                return i
        raise KeyError(name)

    @property
    def target_index(self) -> int:
        return self.index_of(self.target_column)


@dataclass
class DataTable:
    schema: TableSchema
    rows: list[list]

    def __post_init__(self):
        width = len(self.schema.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_values(self, name: str) -> list:
        j = self.schema.index_of(name)
        return [row[j] for row in self.rows]


def load_csv(path, target: str, task: str) -> DataTable:
    """Load a CSV file and infer its schema.

    A column is continuous iff every non-empty cell parses as a finite
    number; otherwise it is categorical with first-occurrence category
    order. Empty cells become missing. Values stay raw (no encoding).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file")
        raw_rows = list(reader)

    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise ValueError(
                f"{path}: row {i + 2} has {len(row)} fields, header has {len(header)}"
            )
    if target not in header:
        raise ValueError(f"target column {target!r} not found in header")

    n_cols = len(header)
    continuous = [True] * n_cols
    for row in raw_rows:
        for j, cell in enumerate(row):
            if cell != "" and continuous[j] and _parse_number(cell) is None:
                continuous[j] = False

    specs = []
    for j, name in enumerate(header):
        if continuous[j]:
            specs.append(ColumnSpec(name=name, kind=CONTINUOUS))
        else:
            seen: dict[str, None] = {}
            for row in raw_rows:
                if row[j] != "":
                    seen.setdefault(row[j], None)
            specs.append(ColumnSpec(name=name, kind=CATEGORICAL, categories=list(seen)))

    schema = TableSchema(columns=specs, target_column=target, task=task)

    rows = []
    for raw in raw_rows:
        row = []
        for j, cell in enumerate(raw):
            if cell == "":
                row.append(None)
            elif continuous[j]:
                row.append(_parse_number(cell))
            else:
                row.append(cell)
        rows.append(row)
    return DataTable(schema=schema, rows=rows)


def drop_incomplete(table: DataTable) -> DataTable:
    """Keep exactly the rows with no missing cells, in order."""
    kept = [list(row) for row in table.rows if all(c is not None for c in row)]
    return DataTable(schema=table.schema, rows=kept)


def encode_categoricals(table: DataTable) -> DataTable:
    """Replace categorical text cells by their index in the column vocabulary."""
    schema = table.schema
    rows = []
    for row in table.rows:
        out = []
        for j, cell in enumerate(row):
            spec = schema.columns[j]
            if cell is None:
                raise ValueError("encode_categoricals requires a complete table")
            if spec.kind == CATEGORICAL and isinstance(cell, str):
                try:
                    out.append(spec.categories.index(cell))
                except ValueError:
                    raise ValueError(
                        f"value {cell!r} not in categories of column {spec.name!r}"
                    ) from None
            else:
                out.append(cell)
        rows.append(out)
    return DataTable(schema=schema, rows=rows)


def normalize_continuous(table: DataTable, stats_source: DataTable) -> DataTable:
    """Z-score continuous columns with population statistics from stats_source.

    Zero-variance columns map to 0 and are flagged in the returned schema.
    """
    src = stats_source.schema
    for a, b in zip(table.schema.columns, src.columns):
        if a.name != b.name or a.kind != b.kind:
            raise ValueError("stats_source schema does not match table schema")

    new_specs = []
    stats = {}
    for j, spec in enumerate(table.schema.columns):
        if spec.kind != CONTINUOUS:
            new_specs.append(replace(spec))
            continue
        values = [row[j] for row in stats_source.rows if row[j] is not None]
        if values:
            arr = np.asarray(values, dtype=np.float64)
            mean = float(arr.mean())
            std = float(arr.std())  # population (divide by n)
        else:
            mean, std = 0.0, 0.0
        new_specs.append(
            replace(spec, mean=mean, std_dev=std, zero_variance=std == 0.0)
        )
        stats[j] = (mean, std)

    new_schema = TableSchema(
        columns=new_specs, target_column=table.schema.target_column, task=table.schema.task
    )
    rows = []
    for row in table.rows:
        out = list(row)
        for j, (mean, std) in stats.items():
            if out[j] is None:
                raise ValueError("normalize_continuous requires a complete table")
            out[j] = (out[j] - mean) / std if std > 0 else 0.0
        rows.append(out)
    return DataTable(schema=new_schema, rows=rows)


def renormalize_continuous(table: DataTable) -> DataTable:
    """Z-score continuous cells using the statistics already stored in the
    schema (the inverse of denormalize_continuous)."""
    stats = {}
    for j, spec in enumerate(table.schema.columns):
        if spec.kind == CONTINUOUS and spec.mean is not None:
            stats[j] = (spec.mean, spec.std_dev, spec.zero_variance)
    rows = []
    for row in table.rows:
        out = list(row)
        for j, (mean, std, zero_var) in stats.items():
            out[j] = 0.0 if zero_var else (out[j] - mean) / std
        rows.append(out)
    return DataTable(schema=table.schema, rows=rows)


def denormalize_continuous(table: DataTable) -> DataTable:
    """Invert normalize_continuous using the statistics stored in the schema."""
    stats = {}
    for j, spec in enumerate(table.schema.columns):
        if spec.kind == CONTINUOUS and spec.mean is not None:
            stats[j] = (spec.mean, spec.std_dev)
    rows = []
    for row in table.rows:
        out = list(row)
        for j, (mean, std) in stats.items():
            out[j] = mean if table.schema.columns[j].zero_variance else out[j] * std + mean
        rows.append(out)
    return DataTable(schema=table.schema, rows=rows)


def shuffle_split(table: DataTable, test_fraction: float, seed: int):
    """Deterministically shuffle and partition rows into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = table.n_rows
    if n == 0:
        raise ValueError("cannot split an empty table")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(test_fraction * n + 0.5)
    shuffled = [list(table.rows[i]) for i in order]
    train = DataTable(schema=table.schema, rows=shuffled[: n - n_test])
    test = DataTable(schema=table.schema, rows=shuffled[n - n_test :])
    return train, test


def preprocess(table: DataTable, test_fraction: float = 0.2, seed: int = 0):
    """Run the full pipeline: drop -> encode -> normalize (train stats) -> split.

    The split happens on the encoded table first so that normalization
    statistics come from the training split only; both splits are then
    normalized with those statistics.
    """
    complete = encode_categoricals(drop_incomplete(table))
    train_raw, test_raw = shuffle_split(complete, test_fraction, seed)
    train = normalize_continuous(train_raw, train_raw)
    test = normalize_continuous(test_raw, train_raw) if test_raw.n_rows else DataTable(
        schema=train.schema, rows=[]
    )
    return train, test


def _spec_to_dict(spec: ColumnSpec) -> dict:
    return {
        "name": spec.name,
        "kind": spec.kind,
        "categories": spec.categories,
        "mean": spec.mean,
        "std_dev": spec.std_dev,
        "zero_variance": spec.zero_variance,
    }


def save_schema(schema: TableSchema, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "columns": [_spec_to_dict(c) for c in schema.columns],
        "target_column": schema.target_column,
        "task": schema.task,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_schema(path) -> TableSchema:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    columns = [
        ColumnSpec(
            name=c["name"],
            kind=c["kind"],
            categories=c["categories"],
            mean=c["mean"],
            std_dev=c["std_dev"],
            zero_variance=c.get("zero_variance", False),
        )
        for c in doc["columns"]
    ]
    return TableSchema(columns=columns, target_column=doc["target_column"], task=doc["task"])


def write_csv(table: DataTable, path) -> None:
    """Write a table as CSV with the original header; categorical indices
    are written back as their category text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in table.schema.columns])
        for row in table.rows:
            out = []
            for j, cell in enumerate(row):
                spec = table.schema.columns[j]
                if cell is None:
                    out.append("")
                elif spec.kind == CATEGORICAL and isinstance(cell, (int, np.integer)):
                    out.append(spec.categories[int(cell)])
                else:
                    out.append(cell)
            writer.writerow(out)
