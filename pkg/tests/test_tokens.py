import pytest

from tabsynth.tokens import (
    BOS,
    EOS,
    PAD,
    SEP_TOKEN,
    UNK,
    Vocab,
    build_vocab,
    decode,
    encode,
    load_vocab,
    save_vocab,
)


class TestBuildVocab:
    def test_smallest_corpus(self):
        vocab = build_vocab(["a is 1"])
        assert len(vocab) == 7  # 4 specials + a, is, 1
        assert {vocab.id_of(w) for w in ("a", "is", "1")} == {4, 5, 6}

    def test_determinism(self):
        corpus = ["b is 2, a is 1", "a is 3"]
        assert build_vocab(corpus).id_to_token == build_vocab(corpus).id_to_token

    def test_frequency_then_lexicographic(self):
        corpus = ["a is 1, a is 2"]  # 'is' x2 via clauses? craft explicit counts
        vocab = build_vocab(["is is is is a a"])
        assert vocab.id_of("is") < vocab.id_of("a")

    def test_empty_corpus(self):
        with pytest.raises(ValueError, match="empty"):
            build_vocab([])

    def test_reserved_tokens_precede_words(self):
        vocab = build_vocab(["a is 1"], reserved=(SEP_TOKEN,))
        assert vocab.id_of(SEP_TOKEN) == 4
        assert vocab.n_reserved == 5


class TestEncode:
    def test_specials_wrap(self):
        vocab = build_vocab(["a is 1"])
        ids = encode("a is 1", vocab)
        assert ids[0] == BOS and ids[-1] == EOS
        assert list(ids[1:-1]) == [vocab.id_of(w) for w in ("a", "is", "1")]

    def test_unknown_word_maps_to_unk(self):
        vocab = build_vocab(["a is 1"])
        ids = encode("a is zz", vocab, add_specials=False)
        assert ids[-1] == UNK

    def test_comma_is_standalone_token(self):
        vocab = build_vocab(["a is 1, b is 2"])
        ids = encode("a is 1, b is 2", vocab, add_specials=False)
        assert vocab.id_of(",") in list(ids)


class TestDecode:
    def test_strips_specials(self):
        vocab = build_vocab(["a is 1"])
        assert decode([BOS, vocab.id_of("a"), EOS], vocab) == "a"

    def test_roundtrip_corpus_sentences(self):
        corpus = ["a is 1, b is x", "b is y, a is 2"]
        vocab = build_vocab(corpus)
        for sentence in corpus:
            assert decode(encode(sentence, vocab), vocab) == sentence

    def test_comma_attaches_to_previous_word(self):
        vocab = build_vocab(["a is 1, b is 2"])
        ids = encode("a is 1, b is 2", vocab)
        assert ", " in decode(ids, vocab)

    def test_out_of_range_id(self):
        vocab = build_vocab(["a is 1"])
        with pytest.raises(ValueError, match="out of range"):
            decode([len(vocab)], vocab)

    def test_pad_ignored(self):
        vocab = build_vocab(["a is 1"])
        assert decode([PAD, PAD, vocab.id_of("1")], vocab) == "1"


class TestSerialization:
    def test_byte_identical_roundtrip(self, tmp_path):
        corpus = ["c is 3, a is 1", "b is 2"]
        vocab = build_vocab(corpus)
        p1, p2 = tmp_path / "v1.json", tmp_path / "v2.json"
        save_vocab(vocab, p1)
        save_vocab(build_vocab(corpus), p2)
        assert p1.read_bytes() == p2.read_bytes()
        loaded = load_vocab(p1)
        assert loaded.id_to_token == vocab.id_to_token
        assert loaded.n_reserved == vocab.n_reserved

    def test_vocab_requires_special_prefix(self):
        with pytest.raises(ValueError, match="special"):
            Vocab(id_to_token=["a", "b", "c", "d", "e"])
