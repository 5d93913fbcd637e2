"""Two-model relational synthesis: a parent-table generator plus a child
decoder conditioned on the parent row.

The child model is a decoder-only network fed [BOS, parent sentence, SEP,
child sentence, EOS] with the loss restricted to the child segment --
prefix conditioning standing in for an encoder-decoder pair. Keys are
synthetic sequential integers assigned after generation, never produced by
a model, so referential integrity holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codec, tokens
from .data import KEY, ColumnSpec, DataTable, TableSchema, denormalize_continuous
from .model import ModelConfig, TransformerModel, init_model
from .sample import (
    GenerationBudgetError,
    GenerationStats,
    SampleConfig,
    _attempt_rng,
    _generate_wave,
    _sentence_to_row,
    generate_table,
)
from .tokens import BOS, EOS, SEP_TOKEN, Vocab, build_vocab, encode
from .train import TrainConfig, fit_table, train


@dataclass
class RelationalSchema:
    parent: TableSchema
    parent_key: str
    child: TableSchema
    foreign_key: str
    max_children_per_parent: int = 16

    def __post_init__(self):
        if self.parent.column(self.parent_key).kind != KEY:
            raise ValueError(f"parent key column {self.parent_key!r} must have kind 'key'")
        if self.child.column(self.foreign_key).kind != KEY:
            raise ValueError(f"foreign key column {self.foreign_key!r} must have kind 'key'")
        if self.max_children_per_parent < 1:
            raise ValueError("max_children_per_parent must be >= 1")


@dataclass
class RelationalModel:
    parent_model: TransformerModel
    child_model: TransformerModel
    vocab: Vocab
    schema: RelationalSchema


class EmpiricalDistribution:
    """Distribution over small non-negative integers, estimated from counts."""

    def __init__(self, counts):
        counts = [int(c) for c in counts]
        if not counts:
            raise ValueError("no counts to estimate from")
        if min(counts) < 0:
            raise ValueError("counts must be non-negative")
        self.support = sorted(set(counts))
        n = len(counts)
        self.probabilities = [counts.count(v) / n for v in self.support]

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.support, p=self.probabilities))

    def pmf(self) -> dict:
        return dict(zip(self.support, self.probabilities))

    def tv_distance(self, other: "EmpiricalDistribution") -> float:
        keys = set(self.support) | set(other.support)
        a, b = self.pmf(), other.pmf()
        return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def with_key_column(table: DataTable, name: str) -> DataTable:
    """Redeclare a column as an integer key; key columns are never encoded,
    normalized, or shown to a model."""
    j = table.schema.index_of(name)
    specs = []
    for i, spec in enumerate(table.schema.columns):
        if i == j:
            specs.append(ColumnSpec(name=spec.name, kind=KEY))
        else:
            specs.append(spec)
    schema = TableSchema(
        columns=specs,
        target_column=table.schema.target_column,
        task=table.schema.task,
    )
    rows = []
    for row in table.rows:
        out = list(row)
        if out[j] is not None:
            try:
                out[j] = int(float(out[j]))
            except (TypeError, ValueError):
                raise ValueError(
                    f"key column {name!r} holds non-integer value {out[j]!r}"
                ) from None
        rows.append(out)
    return DataTable(schema=schema, rows=rows)


def children_histogram(parent: DataTable, child: DataTable, schema: RelationalSchema):
    """Empirical children-per-parent distribution over the training tables."""
    key_j = parent.schema.index_of(schema.parent_key)
    fk_j = child.schema.index_of(schema.foreign_key)
    counts = {row[key_j]: 0 for row in parent.rows}
    for row in child.rows:
        fk = row[fk_j]
        if fk not in counts:
            raise ValueError(f"child row references missing parent key {fk!r}")
        counts[fk] += 1
    return EmpiricalDistribution(list(counts.values()))


def fit_parent(parent_table: DataTable, model_config: ModelConfig,
               train_config: TrainConfig, vocab: Vocab | None = None):
    """Train the parent generator; the key column never enters sentences."""
    model, _, trace = fit_table(parent_table, model_config, train_config, vocab=vocab)
    return model, trace


def _paired_rows(child_table, parent_table, schema):
    key_j = parent_table.schema.index_of(schema.parent_key)
    fk_j = child_table.schema.index_of(schema.foreign_key)
    by_key = {row[key_j]: row for row in parent_table.rows}
    pairs = []
    for row in child_table.rows:
        fk = row[fk_j]
        if fk not in by_key:
            raise ValueError(f"dangling foreign key {fk!r} in child table")
        pairs.append((by_key[fk], row))
    return pairs


def fit_child(child_table: DataTable, parent_table: DataTable,
              schema: RelationalSchema, model_config: ModelConfig,
              train_config: TrainConfig, vocab: Vocab | None = None):
    """Train the parent-conditioned child decoder.

    Sequences are [BOS, parent sentence, SEP, child sentence, EOS]; only
    child-segment predictions contribute to the loss. The parent prefix
    keeps identity column order; child clause order is redrawn per epoch.
    """
    pairs = _paired_rows(child_table, parent_table, schema)
    if not pairs:
        raise ValueError("child table is empty")
    if vocab is None:
        corpus = [codec.row_to_text(p, parent_table.schema) for p, _ in pairs]
        corpus += [codec.row_to_text(c, child_table.schema) for _, c in pairs]
        vocab = build_vocab(corpus, reserved=(SEP_TOKEN,))
    sep = vocab.id_of(SEP_TOKEN)
    if sep == tokens.UNK:
        raise ValueError("vocabulary lacks the reserved separator token")

    perm_rng = np.random.default_rng([train_config.seed, 0xC1])

    def build(parent_row, child_row, order):
        head = encode(codec.row_to_text(parent_row, parent_table.schema), vocab,
                      add_specials=False)
        tail = encode(codec.row_to_text(child_row, child_table.schema, order), vocab,
                      add_specials=False)
        return np.concatenate([[BOS], head, [sep], tail, [EOS]]).astype(np.int64)

    def make_corpus(_epoch):
        return [
            build(p, c, codec.permute_order(child_table.schema, perm_rng))
            for p, c in pairs
        ]

    first = make_corpus(-1)
    loss_starts = []
    for seq in first:
        sep_pos = int(np.nonzero(seq == sep)[0][0])
        loss_starts.append(sep_pos + 1)
    needed = max(len(s) for s in first)
    config = ModelConfig(
        layers=model_config.layers,
        hidden_dim=model_config.hidden_dim,
        heads=model_config.heads,
        vocab_size=model_config.vocab_size or len(vocab),
        context_len=model_config.context_len or needed,
        ffn_mult=model_config.ffn_mult,
    )
    model = init_model(config, train_config.seed)
    model, trace = train(model, first, train_config, resample=make_corpus,
                         loss_starts=loss_starts)
    return model, trace


def fit_relational(parent_table: DataTable, child_table: DataTable,
                   schema: RelationalSchema, model_config: ModelConfig,
                   train_config: TrainConfig) -> RelationalModel:
    """Fit both models over a shared vocabulary covering both tables."""
    corpus = [codec.row_to_text(r, parent_table.schema) for r in parent_table.rows]
    corpus += [codec.row_to_text(r, child_table.schema) for r in child_table.rows]
    vocab = build_vocab(corpus, reserved=(SEP_TOKEN,))
    parent_model, _ = fit_parent(parent_table, model_config, train_config, vocab=vocab)
    child_model, _ = fit_child(child_table, parent_table, schema, model_config,
                               train_config, vocab=vocab)
    return RelationalModel(parent_model, child_model, vocab, schema)


def _renormalized(row, table_schema):
    out = list(row)
    for j, spec in enumerate(table_schema.columns):
        if spec.kind != KEY and spec.mean is not None:
            out[j] = 0.0 if spec.zero_variance else (row[j] - spec.mean) / spec.std_dev
    return out


def generate_relational(rel_model: RelationalModel, schema: RelationalSchema,
                        n_parents: int, children_dist: EmpiricalDistribution,
                        config: SampleConfig):
    """Generate a parent table and a child table with intact key relations.

    Parents are sampled first and given sequential keys; each parent draws
    its child count from the empirical histogram and conditions its
    children on its own sentence. Returns (parent, child, stats).
    """
    if n_parents < 1:
        raise ValueError("n_parents must be >= 1")
    config.validate()
    vocab = rel_model.vocab
    parent, parent_stats = generate_table(
        rel_model.parent_model, vocab, schema.parent, n_parents, config
    )

    count_rng = _attempt_rng(config.seed, 2)
    key_j = schema.parent.index_of(schema.parent_key)
    fk_j = schema.child.index_of(schema.foreign_key)
    sep = vocab.id_of(SEP_TOKEN)

    jobs = []  # (parent key, prompt)
    for row in parent.rows:
        n_children = min(children_dist.sample(count_rng), schema.max_children_per_parent)
        if n_children == 0:
            continue
        # prompts must be in the normalized units the child model saw in training
        head = encode(
            codec.row_to_text(_renormalized(row, schema.parent), schema.parent),
            vocab, add_specials=False,
        )
        prompt = np.concatenate([[BOS], head, [sep]]).astype(np.int64)
        jobs.extend((row[key_j], prompt) for _ in range(n_children))

    stats = GenerationStats(rows_requested=len(jobs))
    budget_each = config.max_attempts_per_row
    pending = [(i, key, prompt, 0) for i, (key, prompt) in enumerate(jobs)]
    results: dict[int, list] = {}
    while pending:
        wave = pending[:64]
        pending = pending[64:]
        rngs = [_attempt_rng(config.seed, 3, i, tries) for i, _, _, tries in wave]
        seqs = _generate_wave(
            rel_model.child_model,
            [prompt for _, _, prompt, _ in wave],
            rngs, config.temperature, config.max_tokens,
        )
        stats.attempts += len(wave)
        for (i, key, prompt, tries), seq in zip(wave, seqs):
            row, reason = _sentence_to_row(seq, len(prompt), vocab, schema.child)
            if row is not None:
                row[fk_j] = key
                results[i] = row
            elif tries + 1 < budget_each:
                stats.reject(reason)
                pending.append((i, key, prompt, tries + 1))
            else:
                stats.reject(reason)

    child_rows = [results[i] for i in sorted(results)]
    stats.rows_emitted = len(child_rows)
    child = denormalize_continuous(DataTable(schema=schema.child, rows=child_rows))
    if len(child_rows) < len(jobs):
        raise GenerationBudgetError(child, stats)
    return parent, child, stats
