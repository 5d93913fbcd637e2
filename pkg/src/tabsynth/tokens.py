"""Word-level tokenizer over row sentences.

Words and the standalone comma are the token alphabet; fixed-precision
numbers recur verbatim across rows, so word-level tokens keep sequences
short without subword machinery.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<bos>", "<eos>", "<unk>"
SEP_TOKEN = "<sep>"
_SPECIAL_TOKENS = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN]

VOCAB_VERSION = 1


def split_words(text: str) -> list[str]:
    """Whitespace words with commas split off as standalone tokens."""
    return text.replace(",", " , ").split()


@dataclass
class Vocab:
    id_to_token: list[str]
    n_reserved: int = 4  # specials plus any extra reserved tokens
    token_to_id: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.id_to_token[:4] != _SPECIAL_TOKENS:
            raise ValueError("vocab must start with the four special tokens")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocab")

    def __len__(self):
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)


def build_vocab(corpus, reserved=()) -> Vocab:
    """Build a vocabulary from sentences; ids are assigned by descending
    frequency, ties broken lexicographically. ``reserved`` tokens get the
    ids right after the specials (used for the relational separator)."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    counts = Counter()
    for sentence in corpus:
        counts.update(split_words(sentence))
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    tokens = _SPECIAL_TOKENS + list(reserved) + ordered
    return Vocab(id_to_token=tokens, n_reserved=4 + len(reserved))


def encode(text: str, vocab: Vocab, add_specials: bool = True) -> np.ndarray:
    ids = [vocab.id_of(w) for w in split_words(text)]
    if add_specials:
        ids = [BOS] + ids + [EOS]
    return np.asarray(ids, dtype=np.int64)


def decode(ids, vocab: Vocab) -> str:
    """Ids back to text; specials and reserved tokens are dropped, the comma
    token reattaches to the preceding word."""
    words = []
    for i in ids:
        i = int(i)
        if not 0 <= i < len(vocab):
            raise ValueError(f"token id {i} out of range for vocab of {len(vocab)}")
        if i < vocab.n_reserved:
            continue
        words.append(vocab.id_to_token[i])
    return " ".join(words).replace(" ,", ",")


def save_vocab(vocab: Vocab, path) -> None:
    doc = {
        "schema_version": VOCAB_VERSION,
        "n_reserved": vocab.n_reserved,
        "tokens": vocab.id_to_token,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_vocab(path) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Vocab(id_to_token=doc["tokens"], n_reserved=doc["n_reserved"])
