import math

import numpy as np
import pytest

from ctxcap.data import Sample
from ctxcap.decoding import (
    DecodeConfig,
    ModelDecoder,
    Scorer,
    apply_repetition_penalty,
    beam_search,
    caption_sample,
    exhaustive_search,
    greedy_decode,
    special_ids,
)
from ctxcap.diagnostics import tiny_instance
from ctxcap.vocab import SPECIALS, Vocabulary


class TableDecoder:
    """Next-token distribution looked up from the prefix emitted so far."""

    def __init__(self, table, default):
        self.table = {tuple(k): np.asarray(v, float) for k, v in table.items()}
        self.default = np.asarray(default, float)

    def init(self):
        return ()

    def step(self, state, token):
        prefix = state if token == 1 and not state else state + (token,)
        return self.table.get(prefix, self.default), {"prefix": prefix}, prefix


class RandomDecoder:
    """Deterministic pseudo-random distributions keyed on the prefix."""

    def __init__(self, size, seed, peaked=1.0):
        self.size, self.seed, self.peaked = size, seed, peaked

    def init(self):
        return ()

    def step(self, state, token):
        prefix = state + (token,)
        rng = np.random.default_rng([self.seed, *prefix])
        logits = rng.normal(size=self.size) * self.peaked
        p = np.exp(logits - logits.max())
        return p / p.sum(), {}, prefix


def test_penalty_example():
    out = apply_repetition_penalty(np.array([0.5, 0.3, 0.2]), [0], 0.2)
    np.testing.assert_allclose(out, [0.1, 0.3, 0.2])
    assert out.sum() != pytest.approx(1.0)


def test_penalty_beta_one_is_identity():
    p = np.array([0.5, 0.3, 0.2])
    np.testing.assert_array_equal(apply_repetition_penalty(p, [0, 1, 2], 1.0), p)


def test_penalty_exempt_ids_untouched():
    out = apply_repetition_penalty(np.array([0.5, 0.3, 0.2]), [0, 2], 0.0, exempt=[2])
    np.testing.assert_array_equal(out, [0.0, 0.3, 0.2])


def test_config_validation():
    with pytest.raises(ValueError):
        DecodeConfig(beam_width=0)
    with pytest.raises(ValueError):
        DecodeConfig(repetition_beta=1.5)


def test_greedy_ties_pick_lowest_id():
    dec = TableDecoder({}, [0.0, 0.0, 0.2, 0.4, 0.4])
    hyp = greedy_decode(dec, DecodeConfig(max_len=1, repetition_beta=1.0))
    assert hyp.tokens == [3]


def test_hand_rolled_three_steps():
    # ids: 0 pad, 1 bos, 2 eos, 3 "x", 4 "y"
    table = {
        (): [0, 0, 0.1, 0.6, 0.3],
        (3,): [0, 0, 0.2, 0.5, 0.3],
        (3, 4): [0, 0, 0.9, 0.05, 0.05],
    }
    dec = TableDecoder(table, [0, 0, 1.0, 0, 0])
    cfg = DecodeConfig(max_len=5, repetition_beta=0.2)
    hyp = greedy_decode(dec, cfg)
    # step 2: x is penalized to 0.1, so y (0.3) wins
    assert hyp.tokens == [3, 4, 2]
    assert hyp.score == pytest.approx(math.log(0.6) + math.log(0.3) + math.log(0.9))
    # without the penalty greedy repeats x
    assert greedy_decode(dec, DecodeConfig(max_len=5, repetition_beta=1.0)).tokens[:2] == [3, 3]


def test_beam_beats_greedy_on_trap():
    # greedy takes "x" (0.6) but every continuation after it is flat;
    # "y" (0.4) leads to a near-certain EOS
    table = {
        (): [0, 0, 0.0, 0.6, 0.4],
        (3,): [0, 0, 0.34, 0.33, 0.33],
        (4,): [0, 0, 1.0, 0.0, 0.0],
    }
    dec = TableDecoder(table, [0, 0, 1.0, 0, 0])
    cfg = DecodeConfig(max_len=3, repetition_beta=1.0)
    g = greedy_decode(dec, cfg)
    b = beam_search(dec, DecodeConfig(beam_width=2, max_len=3, repetition_beta=1.0))
    tokens, score = exhaustive_search(dec, cfg, 5)
    assert g.tokens[0] == 3
    assert b.tokens == tokens == [4, 2]
    assert b.score == pytest.approx(score) and b.score > g.score


@pytest.mark.parametrize("seed", range(20))
def test_beam_one_equals_greedy(seed):
    dec = RandomDecoder(6, seed)
    cfg = DecodeConfig(max_len=6, repetition_beta=0.5)
    g = greedy_decode(dec, cfg, Scorer(cfg, banned=[0, 1]))
    b = beam_search(dec, cfg, Scorer(cfg, banned=[0, 1]))
    assert g.tokens == b.tokens
    assert g.score == pytest.approx(b.score)


@pytest.mark.parametrize("seed", range(20))
def test_wide_beam_equals_exhaustive(seed):
    V, L = 5, 4
    dec = RandomDecoder(V, seed, peaked=2.0)
    cfg = DecodeConfig(beam_width=V**L, max_len=L, repetition_beta=0.3)
    scorer = Scorer(cfg, exempt=[2], banned=[0, 1])
    tokens, score = exhaustive_search(dec, cfg, V, scorer)
    hyp = beam_search(dec, cfg, scorer)
    assert hyp.tokens == tokens
    assert hyp.score == pytest.approx(score, abs=1e-12)


def test_beta_zero_never_repeats():
    dec = TableDecoder({}, [0, 0, 0.01, 0.5, 0.3, 0.19])
    for width in (1, 3):
        cfg = DecodeConfig(beam_width=width, max_len=4, repetition_beta=0.0)
        hyp = beam_search(dec, cfg, Scorer(cfg, exempt=[2], banned=[0, 1]))
        content = [t for t in hyp.tokens if t != 2]
        assert len(content) == len(set(content))


def test_special_ids_cover_punctuation():
    v = Vocabulary(["dog", ".", ","])
    exempt, banned = special_ids(v)
    assert set(exempt) == set(range(len(SPECIALS))) | {v.stoi["."], v.stoi[","]}
    assert banned == [v.pad, v.bos]


class TestModelDecoder:
    def setup_method(self):
        self.model, _ = tiny_instance(dim=8, seed=1)
        self.vocab = Vocabulary([f"w{i}" for i in range(8)])
        rng = np.random.default_rng(0)
        self.sample = Sample("c", rng.normal(size=(3, 8)), ["w4", "alice", "w5"], ["alice"])

    def test_step_distribution(self):
        dec = ModelDecoder(self.model, self.sample, self.vocab)
        probs, trace, _ = dec.step(dec.init(), self.vocab.bos)
        assert probs.shape == (len(self.vocab) + 1,)
        assert abs(probs.sum() - 1) < 1e-9
        assert 0 < trace["p_gen"] < 1
        assert abs(sum(trace["attention"]) - 1) < 1e-9

    def test_caption_sample_resolves_oov(self):
        cfg = DecodeConfig(max_len=3, repetition_beta=0.2)
        words, hyp, traces = caption_sample(self.model, self.sample, self.vocab, cfg)
        assert len(traces) == len(hyp.tokens)
        for w in words:
            assert w in self.vocab or w == "alice"
        assert "<pad>" not in words and "<bos>" not in words
