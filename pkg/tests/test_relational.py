import numpy as np
import pytest

from conftest import parent_child_tables
from tabsynth.codec import row_to_text, text_to_row
from tabsynth.data import DataTable, normalize_continuous
from tabsynth.model import ModelConfig
from tabsynth.relational import (
    EmpiricalDistribution,
    RelationalSchema,
    children_histogram,
    fit_child,
    fit_parent,
    fit_relational,
    generate_relational,
)
from tabsynth.sample import SampleConfig, _generate_wave
from tabsynth.tokens import BOS, SEP_TOKEN, decode, encode
from tabsynth.train import TrainConfig, _loss_and_grad, _pad_batch
from tabsynth.model import forward_batch


def fixture_tables(n_parents=20, seed=0):
    parent, child = parent_child_tables(n_parents, seed=seed)
    parent = normalize_continuous(parent, parent)
    child = normalize_continuous(child, child)
    schema = RelationalSchema(
        parent=parent.schema,
        parent_key="pid",
        child=child.schema,
        foreign_key="pid",
        max_children_per_parent=4,
    )
    return parent, child, schema


class TestFitParent:
    def test_smoke_loss_decreases(self):
        parent, _, _ = fixture_tables()
        _, trace = fit_parent(
            parent, ModelConfig(1, 16, 2), TrainConfig(epochs=50, batch_size=8, seed=0)
        )
        assert trace.epoch_losses[-1] < trace.epoch_losses[0]

    def test_zero_epochs(self):
        parent, _, _ = fixture_tables()
        model, trace = fit_parent(
            parent, ModelConfig(1, 16, 2), TrainConfig(epochs=0, seed=0)
        )
        assert trace.epoch_losses == []

    def test_determinism(self):
        parent, _, _ = fixture_tables()
        flats = []
        for _ in range(2):
            model, _ = fit_parent(
                parent, ModelConfig(1, 16, 2), TrainConfig(epochs=5, batch_size=8, seed=3)
            )
            flats.append(model.flat.copy())
        assert np.array_equal(flats[0], flats[1])

    def test_key_column_never_in_sentences(self):
        parent, _, _ = fixture_tables()
        sentence = row_to_text(parent.rows[0], parent.schema)
        assert "pid" not in sentence


class TestFitChild:
    def test_dangling_key_named(self):
        parent, child, schema = fixture_tables()
        bad_rows = [list(r) for r in child.rows]
        bad_rows[0][0] = 999
        bad_child = DataTable(schema=child.schema, rows=bad_rows)
        with pytest.raises(ValueError, match="999"):
            fit_child(bad_child, parent, schema, ModelConfig(1, 16, 2), TrainConfig(epochs=1))

    def test_loss_mask_zeroes_parent_segment(self):
        parent, child, schema = fixture_tables()
        rel = fit_relational(
            parent, child, schema, ModelConfig(1, 16, 2),
            TrainConfig(epochs=1, batch_size=8, seed=0),
        )
        sep = rel.vocab.id_of(SEP_TOKEN)
        head = encode(row_to_text(parent.rows[0], parent.schema), rel.vocab, add_specials=False)
        tail = encode(row_to_text(child.rows[0], child.schema), rel.vocab, add_specials=False)
        seq = np.concatenate([[BOS], head, [sep], tail, [2]]).astype(np.int64)
        sep_pos = int(np.nonzero(seq == sep)[0][0])
        x, y, mask = _pad_batch([seq], [sep_pos + 1])
        logits = forward_batch(rel.child_model, x)
        _, dlogits = _loss_and_grad(logits, y, mask)
        # predictions at parent-segment positions carry no loss gradient
        assert np.all(dlogits[0, :sep_pos] == 0.0)
        assert np.any(dlogits[0, sep_pos:] != 0.0)

    def test_greedy_reproduces_functional_child(self):
        parent, child, schema = fixture_tables(n_parents=20, seed=1)
        rel = fit_relational(
            parent, child, schema, ModelConfig(2, 32, 4),
            TrainConfig(epochs=300, batch_size=16, seed=0),
        )
        sep = rel.vocab.id_of(SEP_TOKEN)
        hits = 0
        for parent_row, child_row in zip(parent.rows[:10], _child_of(parent, child)):
            head = encode(row_to_text(parent_row, parent.schema), rel.vocab, add_specials=False)
            prompt = np.concatenate([[BOS], head, [sep]]).astype(np.int64)
            out = _generate_wave(
                rel.child_model, [prompt], [np.random.default_rng(0)], 1e-9, None
            )[0]
            got = text_to_row(decode(out[len(prompt):], rel.vocab), child.schema)
            if isinstance(got, list) and got[1] == child_row[1]:
                hits += 1
        assert hits >= 8

    def test_shared_vocab_covers_both_tables(self):
        parent, child, schema = fixture_tables()
        rel = fit_relational(
            parent, child, schema, ModelConfig(1, 16, 2),
            TrainConfig(epochs=1, batch_size=8, seed=0),
        )
        for table in (parent, child):
            sentence = row_to_text(table.rows[0], table.schema)
            ids = encode(sentence, rel.vocab, add_specials=False)
            assert decode(ids, rel.vocab) == sentence


def _child_of(parent, child):
    by_key = {row[0]: row for row in child.rows}
    return [by_key[p[0]] for p in parent.rows]


class TestEmpiricalDistribution:
    def test_pmf(self):
        dist = EmpiricalDistribution([0, 1, 1, 2])
        assert dist.pmf() == {0: 0.25, 1: 0.5, 2: 0.25}

    def test_histogram_counts_zeros(self):
        parent, child, schema = fixture_tables()
        kept = DataTable(schema=child.schema, rows=[r for r in child.rows if r[0] != 0])
        dist = children_histogram(parent, kept, schema)
        assert 0 in dist.support

    def test_tv_distance(self):
        a = EmpiricalDistribution([0, 1])
        b = EmpiricalDistribution([0, 0])
        assert a.tv_distance(b) == pytest.approx(0.5)


@pytest.fixture(scope="module")
def trained_relational():
    parent, child, schema = fixture_tables(n_parents=24, seed=2)
    rel = fit_relational(
        parent, child, schema, ModelConfig(2, 32, 4),
        TrainConfig(epochs=250, batch_size=16, seed=0),
    )
    return parent, child, schema, rel


class TestGenerateRelational:
    def test_integrity_by_construction(self, trained_relational):
        parent, child, schema, rel = trained_relational
        dist = children_histogram(parent, child, schema)
        gp, gc, stats = generate_relational(rel, schema, 5, dist, SampleConfig(seed=0))
        assert gp.n_rows == 5
        keys = {row[0] for row in gp.rows}
        assert len(keys) == 5
        assert all(row[0] in keys for row in gc.rows)
        assert stats.rows_emitted == gc.n_rows

    def test_point_mass_at_zero_children(self, trained_relational):
        parent, child, schema, rel = trained_relational
        dist = EmpiricalDistribution([0, 0, 0])
        _, gc, _ = generate_relational(rel, schema, 5, dist, SampleConfig(seed=0))
        assert gc.n_rows == 0

    def test_children_follow_parent_function(self, trained_relational):
        parent, child, schema, rel = trained_relational
        dist = EmpiricalDistribution([2])
        gp, gc, _ = generate_relational(rel, schema, 40, dist, SampleConfig(seed=1))
        color_of = {0: 0, 1: 1, 2: 2}  # kind index -> color index in the fixture
        kind_by_key = {row[0]: row[1] for row in gp.rows}
        follow = sum(
            1 for row in gc.rows if row[1] == color_of[kind_by_key[row[0]]]
        )
        assert follow / gc.n_rows > 0.8

    def test_children_marginal_close_to_histogram(self, trained_relational):
        parent, child, schema, rel = trained_relational
        dist = children_histogram(parent, child, schema)
        gp, gc, _ = generate_relational(rel, schema, 150, dist, SampleConfig(seed=3))
        got = children_histogram(gp, gc, schema)
        assert dist.tv_distance(got) < 0.15
