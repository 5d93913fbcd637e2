"""Decoder-only transformer with exact parameter accounting.

Pre-LayerNorm residual blocks, learned positional embeddings, tanh-GELU,
tied output head -- the GPT-2 conventions, which make the closed-form
parameter count well defined. Weights live in one flat float32 buffer with
named views so the optimizer can treat the model as a single vector.

The backward pass is hand-written; the training module's finite-difference
checker is the independent route that keeps it honest.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

CHECKPOINT_MAGIC = b"TSYN1"
LAYERNORM_EPS = 1e-5
INIT_STD = 0.02

# Published decoder-only model families: (name, layers, hidden_dim, heads,
# reported parameter count). Used to calibrate the size-model constant.
STANDARD_LLMS = [
    ("GPT-2", 12, 768, 12, 124_000_000),
    ("LLaMA", 32, 4096, 32, 7_000_000_000),
    ("GPT-Neo", 32, 2048, 16, 2_700_000_000),
    ("GPT-BigCode", 40, 5120, 40, 15_000_000_000),
]

# Reference sweep configurations with their published constants and sizes,
# kept as data only; the printed sizes are not all consistent with c*L*H^2
# and are never asserted against the formula.
SWEEP_REFERENCE = [
    ("GPT-2", 6, 768, 18, 57_000_000),
    ("GPT-2", 12, 768, 18, 113_000_000),
    ("GPT-Neox", 1, 2048, 12, 528_000_000),
    ("GPT-Neo", 2, 2048, 20, 151_000_000),
    ("GPT-Neo", 4, 2048, 20, 302_000_000),
    ("GPT-Neo", 6, 2048, 20, 453_000_000),
    ("GPT-Neo", 8, 2048, 20, 604_000_000),
    ("GPT-J", 1, 4096, 13, 218_000_000),
    ("GPT-BigCode", 12, 5120, 14, 3_460_000_000),
    ("GPT-BigCode", 6, 5120, 14, 1_730_000_000),
    ("LLaMA", 2, 4096, 13, 403_000_000),
    ("LLaMA", 1, 4096, 13, 201_000_000),
]


@dataclass
class ModelConfig:
    layers: int
    hidden_dim: int
    heads: int
    vocab_size: int = 0  # 0 = derive from the corpus at fit time
    context_len: int = 0  # 0 = derive from the corpus at fit time
    ffn_mult: int = 4

    def validate(self):
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        for name in ("hidden_dim", "heads", "vocab_size", "context_len", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_dim % self.heads != 0:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}"
            )


def param_layout(config: ModelConfig):
    """Declaration-ordered (name, shape) pairs; fixes init, checkpoint and
    flat-buffer order."""
    H, V, T, F = config.hidden_dim, config.vocab_size, config.context_len, config.ffn_mult
    layout = [("tok_emb", (V, H)), ("pos_emb", (T, H))]
    for l in range(config.layers):
        p = f"layer{l}."
        layout += [
            (p + "ln1.g", (H,)), (p + "ln1.b", (H,)),
            (p + "attn.wq", (H, H)), (p + "attn.bq", (H,)),
            (p + "attn.wk", (H, H)), (p + "attn.bk", (H,)),
            (p + "attn.wv", (H, H)), (p + "attn.bv", (H,)),
            (p + "attn.wo", (H, H)), (p + "attn.bo", (H,)),
            (p + "ln2.g", (H,)), (p + "ln2.b", (H,)),
            (p + "ffn.w1", (H, F * H)), (p + "ffn.b1", (F * H,)),
            (p + "ffn.w2", (F * H, H)), (p + "ffn.b2", (H,)),
        ]
    layout += [("ln_f.g", (H,)), ("ln_f.b", (H,))]
    return layout


class TransformerModel:
    def __init__(self, config: ModelConfig, flat: np.ndarray):
        config.validate()
        self.config = config
        self.flat = flat
        self.params = {}
        offset = 0
        for name, shape in param_layout(config):
            size = int(np.prod(shape))
            self.params[name] = flat[offset : offset + size].reshape(shape)
            offset += size
        if offset != flat.size:
            raise ValueError(f"buffer holds {flat.size} weights, layout needs {offset}")

    def copy(self, dtype=None) -> "TransformerModel":
        flat = self.flat.astype(dtype) if dtype else self.flat.copy()
        return TransformerModel(self.config, flat)


def count_params(model_or_config) -> int:
    """Exact trainable-parameter count from the closed formula.

    With ffn_mult m: V*H + T*H + L*((4+2m)*H^2 + (9+m)*H) + 2*H; the tied
    output head adds nothing. Equals summing every stored tensor.
    """
    config = getattr(model_or_config, "config", model_or_config)
    H, m = config.hidden_dim, config.ffn_mult
    per_layer = (4 + 2 * m) * H * H + (9 + m) * H
    return (
        config.vocab_size * H
        + config.context_len * H
        + config.layers * per_layer
        + 2 * H
    )


def init_model(config: ModelConfig, seed: int) -> TransformerModel:
    """Fresh model: weight matrices and embeddings ~ N(0, 0.02^2), biases and
    LayerNorm offsets 0, LayerNorm scales 1. Deterministic per seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    flat = np.empty(count_params(config), dtype=np.float32)
    model = TransformerModel(config, flat)
    for name, shape in param_layout(config):
        view = model.params[name]
        if name.endswith(".g"):
            view[...] = 1.0
        elif len(shape) == 1:
            view[...] = 0.0
        else:
            view[...] = rng.normal(0.0, INIT_STD, size=shape).astype(np.float32)
    return model


def _softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _gelu(x):
    # tanh approximation; the derivative below matches it exactly
    u = np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))


def _gelu_grad(x):
    c = np.sqrt(2.0 / np.pi)
    u = c * (x + 0.044715 * x**3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3 * 0.044715 * x**2)


def _layernorm(x, g, b):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYERNORM_EPS)
    xhat = (x - mean) * inv
    return g * xhat + b, (xhat, inv)


def _layernorm_grad(dout, g, cache):
    xhat, inv = cache
    dxhat = dout * g
    dg = (dout * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dout.reshape(-1, xhat.shape[-1]).sum(axis=0)
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dg, db


def _causal_bias(n, dtype):
    bias = np.zeros((n, n), dtype=dtype)
    bias[np.triu_indices(n, k=1)] = -np.inf
    return bias


def causal_attention(q, k, v, return_weights: bool = False):
    """Single-head masked attention: softmax(q k^T / sqrt(d) + mask) v.

    Position i never sees positions j > i; each unmasked row of the
    post-softmax matrix sums to 1.
    """
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    if q.ndim != 2 or q.shape != k.shape or k.shape[0] != v.shape[0]:
        raise ValueError("q, k, v must be (n, d) with matching n and q/k dims")
    n, d = q.shape
    scores = q @ k.T / math.sqrt(d) + _causal_bias(n, q.dtype)
    weights = _softmax(scores)
    out = weights @ v
    return (out, weights) if return_weights else out


def _split_heads(x, heads):
    b, n, h = x.shape
    return x.reshape(b, n, heads, h // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, a, n, d = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, a * d)


def forward_batch(model: TransformerModel, ids: np.ndarray, cache: list | None = None):
    """Next-token logits for a right-padded id batch (B, n) -> (B, n, V).

    When ``cache`` is a list, activations needed by backward_batch are
    appended to it.
    """
    cfg, P = model.config, model.params
    ids = np.atleast_2d(np.asarray(ids))
    b, n = ids.shape
    if n > cfg.context_len:
        raise ValueError(f"sequence length {n} exceeds context {cfg.context_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id out of vocabulary range")

    x = P["tok_emb"][ids] + P["pos_emb"][:n]
    bias = _causal_bias(n, x.dtype)
    scale = 1.0 / math.sqrt(cfg.hidden_dim // cfg.heads)
    if cache is not None:
        cache.append(("input", ids, n))

    for l in range(cfg.layers):
        p = f"layer{l}."
        a, ln1c = _layernorm(x, P[p + "ln1.g"], P[p + "ln1.b"])
        q = _split_heads(a @ P[p + "attn.wq"] + P[p + "attn.bq"], cfg.heads)
        k = _split_heads(a @ P[p + "attn.wk"] + P[p + "attn.bk"], cfg.heads)
        v = _split_heads(a @ P[p + "attn.wv"] + P[p + "attn.bv"], cfg.heads)
        att = _softmax(q @ k.transpose(0, 1, 3, 2) * scale + bias)
        merged = _merge_heads(att @ v)
        x = x + merged @ P[p + "attn.wo"] + P[p + "attn.bo"]

        a2, ln2c = _layernorm(x, P[p + "ln2.g"], P[p + "ln2.b"])
        pre = a2 @ P[p + "ffn.w1"] + P[p + "ffn.b1"]
        h = _gelu(pre)
        x = x + h @ P[p + "ffn.w2"] + P[p + "ffn.b2"]
        if cache is not None:
            cache.append(("layer", a, ln1c, q, k, v, att, merged, a2, ln2c, pre, h))

    hf, lnfc = _layernorm(x, P["ln_f.g"], P["ln_f.b"])
    logits = hf @ P["tok_emb"].T
    if cache is not None:
        cache.append(("final", hf, lnfc))
    return logits


def forward(model: TransformerModel, tokens) -> np.ndarray:
    """Logits for a single token sequence, shape (n, vocab_size)."""
    return forward_batch(model, np.asarray(tokens)[None, :])[0]


def backward_batch(model: TransformerModel, cache: list, dlogits: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. every parameter, given d(loss)/d(logits)."""
    cfg, P = model.config, model.params
    grads = {name: np.zeros_like(P[name]) for name in P}
    _, ids, n = cache[0]
    _, hf, lnfc = cache[-1]
    H = cfg.hidden_dim
    scale = 1.0 / math.sqrt(H // cfg.heads)

    grads["tok_emb"] += dlogits.reshape(-1, dlogits.shape[-1]).T @ hf.reshape(-1, H)
    dhf = dlogits @ P["tok_emb"]
    dx, dg, db = _layernorm_grad(dhf, P["ln_f.g"], lnfc)
    grads["ln_f.g"] += dg
    grads["ln_f.b"] += db

    for l in range(cfg.layers - 1, -1, -1):
        p = f"layer{l}."
        _, a, ln1c, q, k, v, att, merged, a2, ln2c, pre, h = cache[1 + l]

        # feed-forward residual branch
        dh = dx @ P[p + "ffn.w2"].T
        grads[p + "ffn.w2"] += h.reshape(-1, h.shape[-1]).T @ dx.reshape(-1, H)
        grads[p + "ffn.b2"] += dx.reshape(-1, H).sum(axis=0)
        dpre = dh * _gelu_grad(pre)
        grads[p + "ffn.w1"] += a2.reshape(-1, H).T @ dpre.reshape(-1, dpre.shape[-1])
        grads[p + "ffn.b1"] += dpre.reshape(-1, dpre.shape[-1]).sum(axis=0)
        da2 = dpre @ P[p + "ffn.w1"].T
        dres, dg, db = _layernorm_grad(da2, P[p + "ln2.g"], ln2c)
        grads[p + "ln2.g"] += dg
        grads[p + "ln2.b"] += db
        dx = dx + dres

        # attention residual branch
        dmerged_proj = dx  # gradient at the wo output
        grads[p + "attn.wo"] += merged.reshape(-1, H).T @ dmerged_proj.reshape(-1, H)
        grads[p + "attn.bo"] += dmerged_proj.reshape(-1, H).sum(axis=0)
        do = _split_heads(dmerged_proj @ P[p + "attn.wo"].T, cfg.heads)
        datt = do @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ do
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dscores *= scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        da = np.zeros_like(a)
        for name, dhead in (("wq", dq), ("wk", dk), ("wv", dv)):
            dflat = _merge_heads(dhead)
            grads[p + f"attn.{name}"] += a.reshape(-1, H).T @ dflat.reshape(-1, H)
            grads[p + f"attn.b{name[1]}"] += dflat.reshape(-1, H).sum(axis=0)
            da += dflat @ P[p + f"attn.{name}"].T
        dres, dg, db = _layernorm_grad(da, P[p + "ln1.g"], ln1c)
        grads[p + "ln1.g"] += dg
        grads[p + "ln1.b"] += db
        dx = dx + dres

    np.add.at(grads["tok_emb"], ids.reshape(-1), dx.reshape(-1, H))
    grads["pos_emb"][:n] += dx.sum(axis=0)
    return grads


class SizeEstimate(NamedTuple):
    c: float
    layers: int
    hidden_dim: int
    estimated_params: int


class CalibratedConstant(NamedTuple):
    raw: float
    rounded: int


def estimate_size(c: float, layers: int, hidden_dim: int) -> SizeEstimate:
    """Size model: parameters ~ c * L * H^2."""
    if c <= 0 or layers <= 0 or hidden_dim <= 0:
        raise ValueError("estimate_size requires positive inputs")
    return SizeEstimate(c, layers, hidden_dim, round(c * layers * hidden_dim**2))


def calibrate_c(known_params: int, layers: int, hidden_dim: int) -> CalibratedConstant:
    """Family constant from a configuration with known parameter count."""
    if known_params <= 0 or layers <= 0 or hidden_dim <= 0:
        raise ValueError("calibrate_c requires positive inputs")
    raw = known_params / (layers * hidden_dim**2)
    return CalibratedConstant(raw, round(raw))


def save_checkpoint(model: TransformerModel, path) -> None:
    cfg = model.config
    header = struct.pack(
        "<6I", cfg.layers, cfg.hidden_dim, cfg.heads,
        cfg.vocab_size, cfg.context_len, cfg.ffn_mult,
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        fh.write(np.ascontiguousarray(model.flat, dtype="<f4").tobytes())


def load_checkpoint(path) -> TransformerModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        fields = struct.unpack("<6I", fh.read(24))
        config = ModelConfig(*fields)
        flat = np.frombuffer(fh.read(), dtype="<f4").astype(np.float32)
    expected = count_params(config)
    if flat.size != expected:
        raise ValueError(f"{path}: expected {expected} weights, found {flat.size}")
    return TransformerModel(config, flat)
