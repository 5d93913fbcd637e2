import math

import numpy as np
import pytest

from tabsynth.data import (
    CATEGORICAL,
    CLASSIFICATION,
    CONTINUOUS,
    REGRESSION,
    ColumnSpec,
    DataTable,
    TableSchema,
    denormalize_continuous,
    drop_incomplete,
    encode_categoricals,
    load_csv,
    load_schema,
    normalize_continuous,
    preprocess,
    renormalize_continuous,
    save_schema,
    shuffle_split,
    write_csv,
)


def write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_smallest_well_formed(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n1,x\n2,y\n"), target="b", task=CLASSIFICATION)
        assert [c.kind for c in table.schema.columns] == [CONTINUOUS, CATEGORICAL]
        assert table.schema.column("b").categories == ["x", "y"]
        assert table.rows == [[1.0, "x"], [2.0, "y"]]

    def test_table3_shaped_dataset(self, tmp_path):
        # stroke-shaped: 5110 rows, 11 columns, 7 categorical + 4 continuous
        rng = np.random.default_rng(0)
        cat_names = [f"c{i}" for i in range(7)]
        cont_names = [f"x{i}" for i in range(4)]
        header = ",".join(cat_names + cont_names)
        lines = [header]
        for _ in range(5110):
            cats = [f"v{rng.integers(3)}" for _ in range(7)]
            conts = [f"{rng.normal():.3f}" for _ in range(4)]
            lines.append(",".join(cats + conts))
        table = load_csv(write(tmp_path, "\n".join(lines) + "\n"), "c0", CLASSIFICATION)
        assert table.n_rows == 5110
        assert len(table.schema.columns) == 11
        kinds = [c.kind for c in table.schema.columns]
        assert kinds.count(CATEGORICAL) == 7
        assert kinds.count(CONTINUOUS) == 4

    def test_empty_field_becomes_missing(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n1,\n2,y\n"), target="b", task=CLASSIFICATION)
        assert table.rows[0] == [1.0, None]

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "absent.csv", "a", CLASSIFICATION)

    def test_arity_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="fields"):
            load_csv(write(tmp_path, "a,b\n1,x,9\n"), "b", CLASSIFICATION)

    def test_target_absent(self, tmp_path):
        with pytest.raises(ValueError, match="target"):
            load_csv(write(tmp_path, "a,b\n1,x\n"), "zzz", CLASSIFICATION)

    def test_task_kind_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="regression target"):
            load_csv(write(tmp_path, "a,b\n1,x\n"), "b", REGRESSION)

    def test_quoted_fields(self, tmp_path):
        table = load_csv(
            write(tmp_path, 'a,b\n1,"x y"\n2,"z"\n'), target="b", task=CLASSIFICATION
        )
        assert table.schema.column("b").categories == ["x y", "z"]


class TestDropIncomplete:
    def test_identity_when_complete(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n1,x\n2,y\n"), "b", CLASSIFICATION)
        assert drop_incomplete(table).rows == table.rows

    def test_filters_in_order(self, tmp_path):
        csv = "a,b\n1,x\n,y\n3,z\n4,\n"
        table = load_csv(write(tmp_path, csv), "b", CLASSIFICATION)
        kept = drop_incomplete(table)
        assert kept.rows == [[1.0, "x"], [3.0, "z"]]

    def test_all_rows_incomplete(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n,x\n,y\n"), "b", CLASSIFICATION)
        kept = drop_incomplete(table)
        assert kept.n_rows == 0
        assert kept.schema is table.schema


class TestEncodeCategoricals:
    def test_first_occurrence_order(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n1,x\n2,y\n3,x\n"), "b", CLASSIFICATION)
        encoded = encode_categoricals(table)
        assert [r[1] for r in encoded.rows] == [0, 1, 0]
        assert encoded.schema.column("b").categories == ["x", "y"]

    def test_continuous_only_unchanged(self):
        schema = TableSchema(
            [ColumnSpec("a", CONTINUOUS), ColumnSpec("t", CONTINUOUS)], "t", REGRESSION
        )
        table = DataTable(schema, [[1.0, 2.0], [3.0, 4.0]])
        assert encode_categoricals(table).rows == table.rows

    def test_unseen_value_names_it(self):
        schema = TableSchema(
            [ColumnSpec("b", CATEGORICAL, categories=["x", "y"])], "b", CLASSIFICATION
        )
        table = DataTable(schema, [["z"]])
        with pytest.raises(ValueError, match="'z'"):
            encode_categoricals(table)

    def test_decode_roundtrip(self, tmp_path):
        table = load_csv(write(tmp_path, "a,b\n1,x\n2,y\n3,x\n"), "b", CLASSIFICATION)
        encoded = encode_categoricals(table)
        cats = encoded.schema.column("b").categories
        assert [cats[r[1]] for r in encoded.rows] == [r[1] for r in table.rows]


def continuous_table(values, name="a"):
    schema = TableSchema([ColumnSpec(name, CONTINUOUS)], name, REGRESSION)
    return DataTable(schema, [[float(v)] for v in values])


class TestNormalizeContinuous:
    def test_z_scores_against_self(self):
        # hand oracle: mean 2, population std sqrt(2/3)
        table = continuous_table([1, 2, 3])
        std = math.sqrt(2.0 / 3.0)
        expected = [(v - 2.0) / std for v in (1, 2, 3)]
        assert expected == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)
        out = normalize_continuous(table, table)
        assert [r[0] for r in out.rows] == pytest.approx(expected, abs=1e-12)

    def test_constant_column_flagged(self):
        table = continuous_table([5, 5, 5])
        out = normalize_continuous(table, table)
        assert [r[0] for r in out.rows] == [0.0, 0.0, 0.0]
        assert out.schema.column("a").zero_variance

    def test_train_stats_differ_from_self_stats(self):
        test = continuous_table([1, 2, 3, 4])
        train = continuous_table([10, 20, 30, 40])
        with_train_stats = normalize_continuous(test, train)
        with_self_stats = normalize_continuous(test, test)
        a = [r[0] for r in with_train_stats.rows]
        b = [r[0] for r in with_self_stats.rows]
        assert not np.allclose(a, b)

    def test_self_normalization_moments(self):
        rng = np.random.default_rng(5)
        table = continuous_table(rng.normal(3.0, 2.2, size=200))
        out = normalize_continuous(table, table)
        values = np.array([r[0] for r in out.rows])
        assert abs(values.mean()) < 1e-9
        assert abs(values.std() - 1.0) < 1e-9

    def test_denormalize_inverts(self):
        table = continuous_table([3.0, 7.5, -1.25])
        out = normalize_continuous(table, table)
        back = denormalize_continuous(out)
        assert [r[0] for r in back.rows] == pytest.approx([3.0, 7.5, -1.25])

    def test_renormalize_is_inverse_of_denormalize(self):
        table = continuous_table([3.0, 7.5, -1.25])
        normalized = normalize_continuous(table, table)
        again = renormalize_continuous(denormalize_continuous(normalized))
        assert [r[0] for r in again.rows] == pytest.approx(
            [r[0] for r in normalized.rows]
        )


class TestShuffleSplit:
    def test_partition_arithmetic(self):
        table = continuous_table(range(10))
        train, test = shuffle_split(table, 0.2, seed=1)
        assert (train.n_rows, test.n_rows) == (8, 2)
        got = sorted(r[0] for r in train.rows + test.rows)
        assert got == [float(v) for v in range(10)]

    def test_determinism(self):
        table = continuous_table(range(10))
        first = shuffle_split(table, 0.2, seed=42)
        second = shuffle_split(table, 0.2, seed=42)
        assert first[0].rows == second[0].rows
        assert first[1].rows == second[1].rows

    def test_seeds_change_permutation(self):
        table = continuous_table(range(100))
        a, _ = shuffle_split(table, 0.2, seed=0)
        b, _ = shuffle_split(table, 0.2, seed=1)
        assert a.rows != b.rows

    def test_fraction_bounds(self):
        table = continuous_table(range(4))
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                shuffle_split(table, bad, seed=0)


class TestPipeline:
    def test_composed_pipeline_properties(self, tmp_path):
        csv_lines = ["a,b,t"]
        rng = np.random.default_rng(0)
        for i in range(50):
            a = "" if i % 7 == 0 else f"{rng.normal():.3f}"
            csv_lines.append(f"{a},{'u' if i % 2 else 'v'},{'p' if i % 3 else 'q'}")
        table = load_csv(write(tmp_path, "\n".join(csv_lines) + "\n"), "t", CLASSIFICATION)
        train, test = preprocess(table, 0.2, seed=3)
        for part in (train, test):
            for row in part.rows:
                assert all(c is not None for c in row)
                assert all(isinstance(c, (int, float)) for c in row)
        complete = drop_incomplete(table)
        assert train.n_rows + test.n_rows == complete.n_rows

    def test_split_is_bijection_on_rows(self):
        table = continuous_table(np.arange(33) * 1.5)
        train, test = shuffle_split(table, 0.3, seed=9)
        assert sorted(map(tuple, train.rows + test.rows)) == sorted(
            map(tuple, table.rows)
        )


class TestSchemaSidecar:
    def test_roundtrip(self, tmp_path):
        schema = TableSchema(
            [
                ColumnSpec("a", CONTINUOUS, mean=1.0, std_dev=2.0),
                ColumnSpec("b", CATEGORICAL, categories=["x", "y"]),
            ],
            target_column="b",
            task=CLASSIFICATION,
        )
        path = tmp_path / "t.schema.json"
        save_schema(schema, path)
        loaded = load_schema(path)
        assert loaded == schema

    def test_rejects_delimiter_in_name(self):
        with pytest.raises(ValueError, match="contains"):
            ColumnSpec("a is b", CONTINUOUS)
        with pytest.raises(ValueError, match="contains"):
            ColumnSpec("a, b", CONTINUOUS)


class TestWriteCsv:
    def test_roundtrip_through_csv(self, tmp_path):
        schema = TableSchema(
            [
                ColumnSpec("a", CONTINUOUS),
                ColumnSpec("b", CATEGORICAL, categories=["x", "y"]),
            ],
            "b",
            CLASSIFICATION,
        )
        table = DataTable(schema, [[1.5, 0], [2.5, 1]])
        path = tmp_path / "out.csv"
        write_csv(table, path)
        again = load_csv(path, "b", CLASSIFICATION)
        assert again.rows == [[1.5, "x"], [2.5, "y"]]
