"""Autoregressive sentence generation and row-level rejection sampling.

Invalid generations are rejected and retried rather than constrained at
decode time; GenerationStats exposes what the rejections cost. Continuous
cells are denormalized at emission so synthetic tables come out in the
original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import codec
from .data import CATEGORICAL, KEY, DataTable, denormalize_continuous
from .model import TransformerModel, forward_batch
from .tokens import BOS, EOS, Vocab, decode, encode

GREEDY_TEMPERATURE = 1e-6
LANE_BATCH = 64  # generation lanes evaluated per forward pass


@dataclass
class SampleConfig:
    temperature: float = 0.7
    max_tokens: int | None = None  # None = fill the model context
    max_attempts_per_row: int = 20
    seed: int = 0

    def validate(self):
        if not np.isfinite(self.temperature) or self.temperature <= 0:
            raise ValueError("temperature must be finite and > 0")
        if self.max_attempts_per_row < 1:
            raise ValueError("max_attempts_per_row must be >= 1")


@dataclass
class GenerationStats:
    rows_requested: int
    rows_emitted: int = 0
    attempts: int = 0
    rejections: dict = field(default_factory=dict)

    def reject(self, reason: str):
        self.rejections[reason] = self.rejections.get(reason, 0) + 1

    @property
    def total_rejections(self) -> int:
        return sum(self.rejections.values())

    def as_dict(self):
        return {
            "rows_requested": self.rows_requested,
            "rows_emitted": self.rows_emitted,
            "attempts": self.attempts,
            "rejections": dict(self.rejections),
        }


class GenerationBudgetError(RuntimeError):
    """Attempt budget exhausted before enough valid rows were produced."""

    def __init__(self, table: DataTable, stats: GenerationStats):
        super().__init__(
            f"emitted {stats.rows_emitted}/{stats.rows_requested} rows "
            f"in {stats.attempts} attempts; rejections: {stats.rejections}"
        )
        self.table = table
        self.stats = stats


def sample_token(logits, temperature: float, rng: np.random.Generator) -> int:
    """Draw from softmax(logits / temperature); argmax below the greedy cutoff."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if temperature < GREEDY_TEMPERATURE:
        return int(np.argmax(logits))
    z = logits / temperature
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def _attempt_rng(seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng([seed, *stream])


def _generate_wave(model, prompts, rngs, temperature, max_tokens):
    """Continue several prompts in lockstep until EOS, the token budget, or
    the context limit. Each lane consumes only its own rng stream, so the
    result is independent of how attempts are grouped into waves."""
    context = model.config.context_len
    seqs = [list(p) for p in prompts]
    budgets = [
        max_tokens if max_tokens is not None else context - len(p) for p in prompts
    ]
    active = [i for i, b in enumerate(budgets) if b > 0 and len(seqs[i]) < context]
    while active:
        width = max(len(seqs[i]) for i in active)
        batch = np.zeros((len(active), width), dtype=np.int64)
        for r, i in enumerate(active):
            batch[r, : len(seqs[i])] = seqs[i]
        logits = forward_batch(model, batch)
        still = []
        for r, i in enumerate(active):
            step = sample_token(logits[r, len(seqs[i]) - 1], temperature, rngs[i])
            seqs[i].append(step)
            budgets[i] -= 1
            if step != EOS and budgets[i] > 0 and len(seqs[i]) < context:
                still.append(i)
        active = still
    return [np.asarray(s, dtype=np.int64) for s in seqs]


def generate_sentence(
    model: TransformerModel, vocab: Vocab, prompt_tokens, config: SampleConfig
) -> np.ndarray:
    """Extend a BOS-prefixed prompt token by token; returns prompt + continuation."""
    config.validate()
    prompt = np.asarray(prompt_tokens, dtype=np.int64)
    if prompt.size == 0 or prompt[0] != BOS:
        raise ValueError("prompt must begin with BOS")
    if prompt.size > model.config.context_len:
        raise ValueError("prompt exceeds model context")
    if config.max_tokens == 0:
        return prompt
    rng = np.random.default_rng(config.seed)
    return _generate_wave(model, [prompt], [rng], config.temperature, config.max_tokens)[0]


def _sentence_to_row(seq, skip, vocab, schema):
    """Parse the generated portion of a sequence into a row or a failure reason."""
    text = decode(seq[skip:], vocab)
    parsed = codec.text_to_row(text, schema)
    if isinstance(parsed, codec.ParseFailure):
        return None, parsed.reason
    for j, spec in enumerate(schema.columns):
        if spec.kind == KEY:
            parsed[j] = 0  # placeholder; assigned sequentially at emission
    if not codec.validate_row(parsed, schema):
        return None, codec.BAD_NUMBER
    return parsed, None


def _rejection_loop(model, vocab, schema, n_rows, config, prompt, stream_tag, parse_skip=0):
    stats = GenerationStats(rows_requested=n_rows)
    rows = []
    budget = n_rows * config.max_attempts_per_row
    while len(rows) < n_rows and stats.attempts < budget:
        wave = min(LANE_BATCH, n_rows - len(rows), budget - stats.attempts)
        rngs = [
            _attempt_rng(config.seed, *stream_tag, stats.attempts + i)
            for i in range(wave)
        ]
        seqs = _generate_wave(
            model, [prompt] * wave, rngs, config.temperature, config.max_tokens
        )
        stats.attempts += wave
        for seq in seqs:
            row, reason = _sentence_to_row(seq, parse_skip, vocab, schema)
            if row is None:
                stats.reject(reason)
            else:
                rows.append(row)
    stats.rows_emitted = len(rows)
    return rows, stats


def _finalize_table(rows, schema):
    key_cols = [j for j, s in enumerate(schema.columns) if s.kind == KEY]
    for i, row in enumerate(rows):
        for j in key_cols:
            row[j] = i
    return denormalize_continuous(DataTable(schema=schema, rows=rows))


def generate_table(
    model: TransformerModel,
    vocab: Vocab,
    schema,
    n_rows: int,
    config: SampleConfig,
):
    """Sample schema-valid rows by rejection; returns (table, stats).

    Raises GenerationBudgetError (carrying the partial table and stats)
    after n_rows * max_attempts_per_row failed-or-successful attempts.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    config.validate()
    prompt = np.asarray([BOS], dtype=np.int64)
    rows, stats = _rejection_loop(model, vocab, schema, n_rows, config, prompt, ())
    table = _finalize_table(rows, schema)
    if stats.rows_emitted < n_rows:
        raise GenerationBudgetError(table, stats)
    return table, stats


def _normalize_given(value, spec):
    if spec.mean is None:
        return float(value)
    if spec.zero_variance:
        return 0.0
    return (float(value) - spec.mean) / spec.std_dev


def generate_conditional(
    model: TransformerModel,
    vocab: Vocab,
    schema,
    givens,
    n_rows: int,
    config: SampleConfig,
) -> DataTable:
    """Sample rows that contain the given (column, value) pairs verbatim.

    The prompt is the given clauses in given order plus the clause
    separator; remaining columns are completed by the model. Continuous
    given values are taken in original units.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    config.validate()
    seen = set()
    rendered = []
    for name, value in givens:
        if name in seen:
            raise ValueError(f"column {name!r} given twice")
        seen.add(name)
        spec = schema.column(name)  # raises KeyError for unknown columns
        if spec.kind == KEY:
            raise ValueError(f"cannot condition on key column {name!r}")
        if spec.kind == CATEGORICAL:
            if value not in spec.categories:
                raise ValueError(f"{value!r} is not a category of column {name!r}")
            rendered.append(f"{name}{codec.CLAUSE_VERB}{value}")
        else:
            shown = codec.NUMBER_FORMAT.format(_normalize_given(value, spec))
            rendered.append(f"{name}{codec.CLAUSE_VERB}{shown}")

    modeled = [s.name for s in schema.columns if s.kind != KEY]
    if seen == set(modeled):
        row = _given_row(schema, dict(givens))
        return DataTable(schema=schema, rows=[list(row) for _ in range(n_rows)])

    if not givens:
        table, _ = generate_table(model, vocab, schema, n_rows, config)
        return table

    prompt_ids = encode(codec.CLAUSE_JOIN.join(rendered), vocab, add_specials=False)
    prompt = np.concatenate([[BOS], prompt_ids, [vocab.id_of(",")]]).astype(np.int64)
    rows, stats = _rejection_loop(model, vocab, schema, n_rows, config, prompt, (1,))
    if stats.rows_emitted < n_rows:
        raise GenerationBudgetError(_finalize_table(rows, schema), stats)
    table = _finalize_table(rows, schema)
    pinned = _given_row(schema, dict(givens), partial=True)
    for row in table.rows:
        for j, cell in enumerate(pinned):
            if cell is not None:
                row[j] = cell
    return table


def _given_row(schema, given_map, partial: bool = False):
    row = []
    for spec in schema.columns:
        if spec.name not in given_map:
            if not partial and spec.kind != KEY:
                raise ValueError(f"missing value for column {spec.name!r}")
            row.append(0 if spec.kind == KEY else None)
            continue
        value = given_map[spec.name]
        if spec.kind == CATEGORICAL:
            row.append(spec.categories.index(value))
        else:
            row.append(float(value))
    return row
