import numpy as np
import pytest

from ctxcap.data import Sample, make_batch
from ctxcap.vocab import SPECIALS, ExtendedVocab, Vocabulary, build_vocab, is_punct, is_special


def test_specials_take_lowest_ids():
    v = Vocabulary(["dog", "cat"])
    assert v.itos[: len(SPECIALS)] == list(SPECIALS)
    assert (v.pad, v.bos, v.eos, v.unk) == (0, 1, 2, 3)


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


class TestBuildVocab:
    def test_keeps_everything_when_room(self):
        v = build_vocab([["b", "a", "b"]], 100)
        assert set(v.itos) == set(SPECIALS) | {"a", "b"}

    def test_frequency_clipping(self):
        v = build_vocab([["a", "a", "b"]], len(SPECIALS) + 1)
        assert "a" in v and "b" not in v
        assert v.encode(["b"]) == [v.unk]

    def test_lexicographic_ties(self):
        v = build_vocab([["zeta", "alpha", "mid"]], len(SPECIALS) + 2)
        assert v.itos[len(SPECIALS):] == ["alpha", "mid"]

    def test_deterministic(self):
        corpus = [["x", "y", "z", "y"], ["q", "x"]]
        assert build_vocab(corpus, 9).to_json() == build_vocab(list(reversed(corpus)), 9).to_json()


def test_json_round_trip(tmp_path):
    v = build_vocab([["a", "b", "a"]], 20)
    v.save(tmp_path / "v.json")
    assert Vocabulary.load(tmp_path / "v.json") == v


def test_token_classes():
    assert is_special("<eos>") and not is_special(".")
    assert is_punct(".") and is_punct("...") and not is_punct("<eos>") and not is_punct("a.")


class TestExtendedVocab:
    def setup_method(self):
        self.v = Vocabulary(["the", "is"])
        self.ext = ExtendedVocab.from_context(self.v, ["maggie", "is", "the", "bob", "maggie"])

    def test_oov_order_of_first_occurrence(self):
        assert self.ext.oov == ["maggie", "bob"]
        assert len(self.ext) == len(self.v) + 2

    def test_ids(self):
        V = len(self.v)
        assert self.ext.encode(["maggie", "the", "bob", "nobody"]) == [V, self.v.stoi["the"], V + 1, self.v.unk]
        assert self.ext.id_of("bob") == V + 1

    def test_resolve(self):
        V = len(self.v)
        assert self.ext.resolve([self.v.stoi["the"], V]) == ["the", "maggie"]
        with pytest.raises(IndexError):
            self.ext.word(V + 2)
        with pytest.raises(IndexError):
            self.ext.word(-1)


class TestMakeBatch:
    def setup_method(self):
        self.v = Vocabulary(["a", "b"])
        rng = np.random.default_rng(0)
        self.samples = [
            Sample("x", rng.normal(size=(2, 3)), ["a", "zed", "b"], ["zed", "a"]),
            Sample("y", rng.normal(size=(3, 3)), ["b"], ["a", "b", "a", "b", "a"]),
        ]

    def test_shapes_and_targets(self):
        b = make_batch(self.samples, self.v, max_len=4)
        V = len(self.v)
        assert b.frames.shape == (2, 3, 3)
        assert b.ctx_mask.tolist() == [[True, True, True], [True, False, False]]
        assert b.copy_map.shape == (2, 3, V + 1)
        # OOV "zed" is a copy target for sample 0, truncated caption for sample 1
        assert b.targets[0, :3].tolist() == [V, self.v.stoi["a"], self.v.eos]
        assert b.dec_in[0, :3].tolist() == [self.v.bos, self.v.unk, self.v.stoi["a"]]
        assert b.tgt_mask.sum(1).tolist() == [3, 4]
        assert b.targets[1, 3] == self.v.eos

    def test_without_context_oov_targets_are_unk(self):
        b = make_batch(self.samples, self.v, max_len=4, use_context=False)
        assert b.targets[0, 0] == self.v.unk
        assert not b.copy_map.any()

    def test_zero_video(self):
        b = make_batch(self.samples, self.v, max_len=4, zero_video=True)
        assert not b.frames.any()

    def test_context_cropping(self):
        b = make_batch(self.samples, self.v, max_len=4, max_context_len=1)
        assert b.ctx_ids.shape[1] == 1
