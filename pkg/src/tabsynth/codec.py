"""Row <-> sentence codec.

A row becomes a sentence of comma-joined clauses ``"<column> is <value>"``.
Clause order follows a column permutation so the model never learns a fixed
column position. Continuous values are rendered with 4 fractional digits,
which bounds the tokenizer vocabulary and fixes the round-trip tolerance
to half an ulp of that grid (5e-5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, CONTINUOUS, KEY, TableSchema

CLAUSE_JOIN = ", "
CLAUSE_VERB = " is "
NUMBER_FORMAT = "{:.4f}"
ROUNDTRIP_TOL = 0.5e-4

# ParseFailure reason codes
MISSING_COLUMN = "missing_column"
DUPLICATE_COLUMN = "duplicate_column"
UNKNOWN_COLUMN = "unknown_column"
BAD_CATEGORY = "bad_category"
BAD_NUMBER = "bad_number"


@dataclass(frozen=True)
class ColumnOrder:
    permutation: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError(f"not a permutation: {self.permutation}")


@dataclass(frozen=True)
class ParseFailure:
    reason: str
    detail: str = ""


def identity_order(schema: TableSchema) -> ColumnOrder:
    return ColumnOrder(tuple(range(len(schema.columns))))


def permute_order(schema: TableSchema, rng_seed) -> ColumnOrder:
    """Uniform random column order, deterministic per seed.

    ``rng_seed`` may also be a numpy Generator so a caller drawing many
    permutations does not pay generator construction per row.
    """
    k = len(schema.columns)
    if k < 1:
        raise ValueError("schema has no columns")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return ColumnOrder(tuple(int(i) for i in rng.permutation(k)))


def render_value(cell, spec) -> str:
    if spec.kind == CATEGORICAL:
        if isinstance(cell, str):
            if cell not in spec.categories:
                raise ValueError(f"{cell!r} not a category of {spec.name!r}")
            return cell
        return spec.categories[int(cell)]
    return NUMBER_FORMAT.format(float(cell))


def row_to_text(row, schema: TableSchema, order: ColumnOrder | None = None) -> str:
    """Render a complete row as a clause sentence in the given column order."""
    if order is None:
        order = identity_order(schema)
    clauses = []
    for j in order.permutation:
        spec = schema.columns[j]
        if spec.kind == KEY:
            continue
        cell = row[j]
        if cell is None:
            raise ValueError(f"missing cell in column {spec.name!r}")
        clauses.append(f"{spec.name}{CLAUSE_VERB}{render_value(cell, spec)}")
    return CLAUSE_JOIN.join(clauses)


def text_to_row(sentence: str, schema: TableSchema):
    """Parse a sentence back into a row, tolerating any clause order.

    Returns the row, or a ParseFailure with a reason code. Never raises on
    malformed input; model output goes straight through here.
    """
    columns = {spec.name: (j, spec) for j, spec in enumerate(schema.columns) if spec.kind != KEY}
    cells: dict[int, object] = {}
    for clause in str(sentence).split(CLAUSE_JOIN):
        name, sep, value = clause.partition(CLAUSE_VERB)
        if not sep or name not in columns:
            return ParseFailure(UNKNOWN_COLUMN, clause)
        j, spec = columns[name]
        if j in cells:
            return ParseFailure(DUPLICATE_COLUMN, name)
        if spec.kind == CATEGORICAL:
            if value not in spec.categories:
                return ParseFailure(BAD_CATEGORY, f"{name}={value}")
            cells[j] = spec.categories.index(value)
        else:
            number = _to_number(value)
            if number is None:
                return ParseFailure(BAD_NUMBER, f"{name}={value}")
            cells[j] = number
    for name, (j, _) in columns.items():
        if j not in cells:
            return ParseFailure(MISSING_COLUMN, name)
    return [cells.get(j) for j in range(len(schema.columns))]


def _to_number(text: str):
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def quantize_numbers(table):
    """Map every continuous cell through the sentence precision grid.

    The generator reads and writes numbers as 4-decimal text, so a fair
    real-vs-synthetic comparison renders the real side at the same
    precision; full-precision reals would differ from their own textual
    round trip by float dust a discriminator can exploit.
    """
    from .data import DataTable  # local import to avoid a cycle

    rows = []
    for row in table.rows:
        out = list(row)
        for j, spec in enumerate(table.schema.columns):
            if spec.kind == CONTINUOUS and out[j] is not None:
                out[j] = float(NUMBER_FORMAT.format(float(out[j])))
        rows.append(out)
    return DataTable(schema=table.schema, rows=rows)


def validate_row(row, schema: TableSchema) -> bool:
    """True iff arity matches, category indices are in range and numbers finite."""
    if len(row) != len(schema.columns):
        return False
    for cell, spec in zip(row, schema.columns):
        if spec.kind == CATEGORICAL:
            if isinstance(cell, bool) or not isinstance(cell, (int, np.integer)):
                return False
            if not 0 <= int(cell) < len(spec.categories):
                return False
        elif spec.kind == CONTINUOUS:
            if cell is None or isinstance(cell, (str, bool)):
                return False
            if not math.isfinite(float(cell)):
                return False
        else:  # key columns: integers, unconstrained range
            if not isinstance(cell, (int, np.integer)):
                return False
    return True
