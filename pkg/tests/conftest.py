import numpy as np
import pytest

from tabsynth.data import (
    CLASSIFICATION,
    KEY,
    CATEGORICAL,
    CONTINUOUS,
    ColumnSpec,
    DataTable,
    TableSchema,
)

GROUPS = ["alpha", "beta", "gamma"]
CODE_OF = {"alpha": "low", "beta": "high", "gamma": "high"}
BASE_OF = {"alpha": 1.0, "beta": 2.0, "gamma": 3.0}
LABEL_OF = {"alpha": "no", "beta": "yes", "gamma": "yes"}
DELTAS = [0.0, 0.25, 0.5, 0.75]


def dependency_schema() -> TableSchema:
    return TableSchema(
        columns=[
            ColumnSpec("group", CATEGORICAL, categories=list(GROUPS)),
            ColumnSpec("code", CATEGORICAL, categories=["low", "high"]),
            ColumnSpec("level", CONTINUOUS),
            ColumnSpec("label", CATEGORICAL, categories=["no", "yes"]),
        ],
        target_column="label",
        task=CLASSIFICATION,
    )


def dependency_table(n_rows: int, seed: int = 0) -> DataTable:
    """The deterministic-dependency fixture: code, label and the level base
    are all functions of group; level adds a quantized offset."""
    rng = np.random.default_rng(seed)
    schema = dependency_schema()
    rows = []
    for _ in range(n_rows):
        group = GROUPS[rng.integers(len(GROUPS))]
        delta = DELTAS[rng.integers(len(DELTAS))]
        rows.append(
            [
                GROUPS.index(group),
                ["low", "high"].index(CODE_OF[group]),
                BASE_OF[group] + delta,
                ["no", "yes"].index(LABEL_OF[group]),
            ]
        )
    return DataTable(schema=schema, rows=rows)


@pytest.fixture
def small_dependency_table():
    return dependency_table(120, seed=7)


def parent_child_tables(n_parents: int, seed: int = 0):
    """Relational fixture: every child column is a function of its parent."""
    rng = np.random.default_rng(seed)
    kinds = ["a", "b", "c"]
    color_of = {"a": "red", "b": "blue", "c": "green"}
    size_of = {"a": 1.0, "b": 2.0, "c": 3.0}
    parent_schema = TableSchema(
        columns=[
            ColumnSpec("pid", KEY),
            ColumnSpec("kind", CATEGORICAL, categories=list(kinds)),
            ColumnSpec("size", CONTINUOUS),
        ],
        target_column="kind",
        task=CLASSIFICATION,
    )
    child_schema = TableSchema(
        columns=[
            ColumnSpec("pid", KEY),
            ColumnSpec("color", CATEGORICAL, categories=["red", "blue", "green"]),
            ColumnSpec("amount", CONTINUOUS),
        ],
        target_column="color",
        task=CLASSIFICATION,
    )
    parents, children = [], []
    for pid in range(n_parents):
        kind = kinds[rng.integers(len(kinds))]
        parents.append([pid, kinds.index(kind), size_of[kind]])
        for _ in range(int(rng.integers(1, 4))):  # 1..3 children each
            children.append(
                [
                    pid,
                    ["red", "blue", "green"].index(color_of[kind]),
                    size_of[kind] * 2.0,
                ]
            )
    return (
        DataTable(schema=parent_schema, rows=parents),
        DataTable(schema=child_schema, rows=children),
    )
