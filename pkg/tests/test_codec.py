import itertools

import numpy as np
import pytest

from tabsynth.codec import (
    BAD_CATEGORY,
    BAD_NUMBER,
    DUPLICATE_COLUMN,
    MISSING_COLUMN,
    UNKNOWN_COLUMN,
    ColumnOrder,
    ParseFailure,
    identity_order,
    permute_order,
    row_to_text,
    text_to_row,
    validate_row,
)
from tabsynth.data import (
    CATEGORICAL,
    CLASSIFICATION,
    CONTINUOUS,
    ColumnSpec,
    TableSchema,
)


@pytest.fixture
def schema():
    return TableSchema(
        columns=[
            ColumnSpec("age", CONTINUOUS),
            ColumnSpec("sex", CATEGORICAL, categories=["male", "female"]),
        ],
        target_column="sex",
        task=CLASSIFICATION,
    )


class TestRowToText:
    def test_identity_order(self, schema):
        assert row_to_text([34.0, 0], schema) == "age is 34.0000, sex is male"

    def test_permuted_order(self, schema):
        order = ColumnOrder((1, 0))
        assert row_to_text([34.0, 0], schema, order) == "sex is male, age is 34.0000"

    def test_single_column(self):
        schema = TableSchema([ColumnSpec("only", CONTINUOUS)], "only", "regression")
        assert row_to_text([1.0], schema) == "only is 1.0000"

    def test_missing_cell_rejected(self, schema):
        with pytest.raises(ValueError, match="missing"):
            row_to_text([None, 0], schema)


class TestPermuteOrder:
    def test_single_column(self):
        schema = TableSchema([ColumnSpec("a", CONTINUOUS)], "a", "regression")
        assert permute_order(schema, 0).permutation == (0,)

    def test_determinism(self, schema):
        assert permute_order(schema, 11) == permute_order(schema, 11)

    def test_uniformity_chi_square(self):
        schema = TableSchema(
            [ColumnSpec(n, CONTINUOUS) for n in ("a", "b", "c")], "a", "regression"
        )
        rng = np.random.default_rng(0)
        counts = {p: 0 for p in itertools.permutations(range(3))}
        for _ in range(6000):
            counts[permute_order(schema, rng).permutation] += 1
        for p, count in counts.items():
            assert abs(count / 6000 - 1 / 6) < 0.02, p


class TestTextToRow:
    def test_roundtrip_any_clause_order(self, schema):
        row = text_to_row("sex is male, age is 34.0000", schema)
        assert row == [34.0, 0]
        row = text_to_row("age is 34.0000, sex is male", schema)
        assert row == [34.0, 0]

    def test_missing_column(self, schema):
        failure = text_to_row("age is 34.0", schema)
        assert isinstance(failure, ParseFailure)
        assert failure.reason == MISSING_COLUMN

    def test_bad_number(self, schema):
        failure = text_to_row("age is banana, sex is male", schema)
        assert failure == ParseFailure(BAD_NUMBER, "age=banana")

    def test_bad_category(self, schema):
        failure = text_to_row("age is 1.0, sex is robot", schema)
        assert failure.reason == BAD_CATEGORY

    def test_duplicate_column(self, schema):
        failure = text_to_row("age is 1.0, age is 2.0, sex is male", schema)
        assert failure.reason == DUPLICATE_COLUMN

    def test_unknown_column(self, schema):
        failure = text_to_row("age is 1.0, shoe is male", schema)
        assert failure.reason == UNKNOWN_COLUMN

    def test_never_raises_on_garbage(self, schema):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            length = int(rng.integers(0, 40))
            junk = bytes(rng.integers(0, 256, size=length)).decode("latin-1")
            out = text_to_row(junk, schema)
            assert isinstance(out, (list, ParseFailure))


class TestValidateRow:
    def test_parsed_row_is_valid(self, schema):
        row = text_to_row("age is 3.5000, sex is female", schema)
        assert validate_row(row, schema)

    def test_nan_cell_invalid(self, schema):
        assert not validate_row([float("nan"), 0], schema)

    def test_out_of_range_category_invalid(self, schema):
        assert not validate_row([1.0, 2], schema)

    def test_arity_mismatch_invalid(self, schema):
        assert not validate_row([1.0], schema)


class TestQuantizeNumbers:
    def test_matches_textual_round_trip(self, schema):
        from tabsynth.codec import quantize_numbers
        from tabsynth.data import DataTable

        table = DataTable(schema, [[0.123456789, 0], [-2.718281828, 1]])
        quantized = quantize_numbers(table)
        for original, row in zip(table.rows, quantized.rows):
            parsed = text_to_row(row_to_text(original, schema), schema)
            assert row[0] == parsed[0]
        assert quantized.rows[0][0] == 0.1235

    def test_idempotent(self, schema):
        from tabsynth.codec import quantize_numbers
        from tabsynth.data import DataTable

        table = DataTable(schema, [[1.23456, 0]])
        once = quantize_numbers(table)
        twice = quantize_numbers(once)
        assert once.rows == twice.rows


class TestRoundTripProperty:
    def test_random_rows_and_permutations(self, schema):
        rng = np.random.default_rng(2)
        for _ in range(500):
            row = [float(rng.normal() * 50), int(rng.integers(2))]
            order = permute_order(schema, rng)
            back = text_to_row(row_to_text(row, schema, order), schema)
            assert isinstance(back, list)
            assert back[1] == row[1]
            assert abs(back[0] - row[0]) <= 0.5e-4

    def test_parse_is_permutation_invariant(self, schema):
        sentences = [
            "age is 5.2500, sex is female",
            "sex is female, age is 5.2500",
        ]
        rows = [text_to_row(s, schema) for s in sentences]
        assert rows[0] == rows[1]
