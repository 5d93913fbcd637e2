"""Next-token training loop with Adam and gradient verification.

From-scratch training replaces LLM fine-tuning at desk scale; the three
sensitivity dimensions (runtime vs depth, utility, similarity) stay
exercisable without multi-GB weights.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import codec, tokens
from .model import (
    ModelConfig,
    TransformerModel,
    backward_batch,
    forward_batch,
    init_model,
    param_layout,
)
from .tokens import PAD


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip_norm: float | None = 1.0
    seed: int = 0

    def validate(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class TrainTrace:
    epoch_losses: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    tokens_seen: int = 0

    def as_dict(self):
        return {
            "epoch_losses": self.epoch_losses,
            "wall_seconds": self.wall_seconds,
            "tokens_seen": self.tokens_seen,
        }


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def cross_entropy(logits: np.ndarray, targets: np.ndarray, loss_mask=None) -> float:
    """Mean -log softmax(logits)[target] over unmasked, non-PAD positions."""
    logits = np.asarray(logits)
    targets = np.asarray(targets)
    if logits.shape[:-1] != targets.shape:
        raise ValueError(f"logits {logits.shape} do not match targets {targets.shape}")
    mask = targets != PAD
    if loss_mask is not None:
        mask = mask & loss_mask
    if not mask.any():
        raise ValueError("no unmasked positions to average over")
    loss, _ = _loss_and_grad(logits, targets, mask)
    return loss


def _loss_and_grad(logits, targets, mask):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1))
    picked = np.take_along_axis(shifted, targets[..., None], axis=-1)[..., 0]
    n = int(mask.sum())
    loss = float(((logz - picked) * mask).sum() / n)
    probs = np.exp(shifted - logz[..., None])
    dlogits = probs
    np.put_along_axis(
        dlogits, targets[..., None],
        np.take_along_axis(dlogits, targets[..., None], axis=-1) - 1.0, axis=-1,
    )
    dlogits *= (mask / n)[..., None]
    return loss, dlogits


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig):
    """One Adam update with bias correction, after global-norm clipping.

    Updates parameter arrays in place and returns (params, state). A
    non-finite gradient aborts the step before any parameter changes.
    """
    sq = 0.0
    for g in grads.values():
        sq += float((g.astype(np.float64) ** 2).sum())
    if not np.isfinite(sq):
        raise ValueError("non-finite gradient; step aborted")
    gnorm = np.sqrt(sq)
    clip = config.grad_clip_norm
    scale = clip / gnorm if clip and gnorm > clip else 1.0

    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    for name, g in grads.items():
        g = g * scale
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        mhat = m / (1.0 - b1**t)
        vhat = v / (1.0 - b2**t)
        p -= config.learning_rate * mhat / (np.sqrt(vhat) + config.eps)
    return params, state


def _pad_batch(seqs, starts):
    width = max(len(s) for s in seqs)
    batch = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        batch[i, : len(s)] = s
    x, y = batch[:, :-1], batch[:, 1:]
    mask = y != PAD
    positions = np.arange(1, width)[None, :]
    mask &= positions >= np.asarray(starts)[:, None]
    return x, y, mask


def train(
    model: TransformerModel,
    corpus,
    config: TrainConfig,
    resample=None,
    loss_starts=None,
):
    """Fit the model on token sequences; returns (model, trace).

    ``resample`` regenerates the corpus at the start of each epoch (used to
    redraw column permutations); ``loss_starts`` gives, per sequence, the
    index of the first token whose prediction counts toward the loss
    (default 1, everything after BOS).

    Fully deterministic per (seeds, config); the model is updated in place.
    """
    config.validate()
    corpus = [np.asarray(s, dtype=np.int64) for s in corpus]
    if not corpus:
        raise ValueError("empty corpus")
    _check_lengths(corpus, model.config.context_len)
    if loss_starts is None:
        loss_starts = [1] * len(corpus)

    rng = np.random.default_rng(config.seed)
    state = AdamState()
    trace = TrainTrace()
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        if resample is not None:
            corpus = [np.asarray(s, dtype=np.int64) for s in resample(epoch)]
            _check_lengths(corpus, model.config.context_len)
        order = rng.permutation(len(corpus))
        total_loss, total_positions = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            x, y, mask = _pad_batch(
                [corpus[i] for i in idx], [loss_starts[i] for i in idx]
            )
            cache = []
            logits = forward_batch(model, x, cache)
            loss, dlogits = _loss_and_grad(logits, y, mask)
            grads = backward_batch(model, cache, dlogits)
            adam_step(model.params, grads, state, config)
            n_pos = int(mask.sum())
            total_loss += loss * n_pos
            total_positions += n_pos
            trace.tokens_seen += int((x != PAD).sum())
        trace.epoch_losses.append(total_loss / total_positions)
    trace.wall_seconds = time.perf_counter() - t0
    return model, trace


def _check_lengths(corpus, context_len):
    longest = max(len(s) for s in corpus)
    if longest > context_len + 1:
        raise ValueError(
            f"sequence of {longest} tokens overflows context length {context_len}"
        )


def grad_check(
    model: TransformerModel,
    batch,
    epsilon: float = 1e-3,
    n_samples: int = 200,
    seed: int = 0,
    loss_starts=None,
    grads_hook=None,
) -> float:
    """Max relative error between analytic gradients and central finite
    differences over randomly sampled weights, computed in float64.

    ``grads_hook`` lets a test tamper with the analytic gradients to prove
    the check catches a broken backward formula.
    """
    probe = model.copy(dtype=np.float64)
    seqs = [np.asarray(s, dtype=np.int64) for s in batch]
    starts = loss_starts if loss_starts is not None else [1] * len(seqs)
    x, y, mask = _pad_batch(seqs, starts)

    def loss_at():
        return _loss_and_grad(forward_batch(probe, x), y, mask)[0]

    cache = []
    logits = forward_batch(probe, x, cache)
    _, dlogits = _loss_and_grad(logits, y, mask)
    grads = backward_batch(probe, cache, dlogits)
    if grads_hook is not None:
        grads = grads_hook(grads)
    analytic = np.concatenate(
        [grads[name].ravel() for name, _ in param_layout(probe.config)]
    )

    rng = np.random.default_rng(seed)
    total = probe.flat.size
    coords = rng.choice(total, size=min(n_samples, total), replace=False)
    worst = 0.0
    for i in coords:
        saved = probe.flat[i]
        probe.flat[i] = saved + epsilon
        up = loss_at()
        probe.flat[i] = saved - epsilon
        down = loss_at()
        probe.flat[i] = saved
        numeric = (up - down) / (2 * epsilon)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


def fit_table(table, model_config: ModelConfig, train_config: TrainConfig, vocab=None):
    """Train a sentence model on a preprocessed table; returns
    (model, vocab, trace).

    Column order is redrawn per row, per epoch. Zero vocab_size or
    context_len in the model config are filled in from the corpus.
    """
    schema = table.schema
    if table.n_rows == 0:
        raise ValueError("empty table")
    base = [codec.row_to_text(row, schema) for row in table.rows]
    if vocab is None:
        vocab = tokens.build_vocab(base)

    perm_rng = np.random.default_rng([train_config.seed, 0xC0])

    def make_corpus(_epoch):
        out = []
        for row in table.rows:
            order = codec.permute_order(schema, perm_rng)
            out.append(tokens.encode(codec.row_to_text(row, schema, order), vocab))
        return out

    first = make_corpus(-1)
    needed = max(len(s) for s in first)
    config = ModelConfig(
        layers=model_config.layers,
        hidden_dim=model_config.hidden_dim,
        heads=model_config.heads,
        vocab_size=model_config.vocab_size or len(vocab),
        context_len=model_config.context_len or needed,
        ffn_mult=model_config.ffn_mult,
    )
    if config.vocab_size < len(vocab):
        raise ValueError("model vocab_size smaller than corpus vocabulary")
    model = init_model(config, train_config.seed)
    model, trace = train(model, first, train_config, resample=make_corpus)
    return model, vocab, trace
