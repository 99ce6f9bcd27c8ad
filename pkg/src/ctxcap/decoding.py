"""Greedy and beam-search inference with repetition penalization.

The search routines only need an object with two methods::

    init() -> state
    step(state, token_id) -> (probs: 1-D array over the extended space,
                              trace: dict, new_state)

``ModelDecoder`` adapts a trained ``CaptionModel`` and one sample to that
protocol; tests plug in hand-built tables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import Sample, make_batch
from .tensor import no_grad
from .vocab import ExtendedVocab, Vocabulary, is_punct, is_special


@dataclass
class DecodeConfig:
    beam_width: int = 1
    repetition_beta: float = 0.2
    max_len: int = 30
    bos_id: int = 1
    eos_id: int = 2
    penalize_all: bool = False

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not 0.0 <= self.repetition_beta <= 1.0:
            raise ValueError("repetition_beta must lie in [0, 1]")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


@dataclass
class StepTrace:
    step: int
    token: int
    word: str
    p_gen: float
    attention: list[float]
    coverage: list[float]
    temporal_attention: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


@dataclass
class Hypothesis:
    tokens: list[int]
    score: float
    state: object
    emitted: frozenset[int]
    traces: list[dict] = field(default_factory=list)


def apply_repetition_penalty(
    probs: np.ndarray,
    emitted: Iterable[int],
    beta: float,
    exempt: Iterable[int] = (),
) -> np.ndarray:
    """Scale the probability of every already-emitted, non-exempt id by beta.
    The result is not renormalized."""
    out = np.array(probs, dtype=np.float64, copy=True)
    exempt = set(exempt)
    for y in emitted:
        if y not in exempt:
            out[y] *= beta
    return out


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


class Scorer:
    """Repetition penalty plus the ids that may never be emitted."""

    def __init__(self, cfg: DecodeConfig, exempt: Iterable[int] = (), banned: Iterable[int] = ()):
        self.cfg = cfg
        self.exempt = frozenset(() if cfg.penalize_all else exempt)
        self.banned = list(banned)

    def adjust(self, probs: np.ndarray, emitted) -> np.ndarray:
        adj = apply_repetition_penalty(probs, emitted, self.cfg.repetition_beta, self.exempt)
        if self.banned:
            adj[self.banned] = 0.0
        return adj


def greedy_decode(decoder, cfg: DecodeConfig, scorer: Scorer | None = None) -> Hypothesis:
    """Pick the highest penalized score at each step; ties go to the lowest id."""
    scorer = scorer or Scorer(cfg)
    state = decoder.init()
    tokens: list[int] = []
    traces: list[dict] = []
    score = 0.0
    prev = cfg.bos_id
    for _ in range(cfg.max_len):
        probs, trace, state = decoder.step(state, prev)
        adj = scorer.adjust(probs, tokens)
        tok = int(np.argmax(adj))
        score += _log(adj[tok])
        tokens.append(tok)
        traces.append(dict(trace, token=tok))
        prev = tok
        if tok == cfg.eos_id:
            break
    return Hypothesis(tokens, score, state, frozenset(tokens), traces)


def beam_search(decoder, cfg: DecodeConfig, scorer: Scorer | None = None) -> Hypothesis:
    """Beam search on summed log penalized scores, no length normalization.

    Hypotheses that emit EOS retire; the best of the retired and the
    surviving hypotheses (at max_len) is returned.
    """
    scorer = scorer or Scorer(cfg)
    live = [Hypothesis([], 0.0, decoder.init(), frozenset())]
    finished: list[Hypothesis] = []
    for _ in range(cfg.max_len):
        candidates = []
        for h_idx, hyp in enumerate(live):
            prev = hyp.tokens[-1] if hyp.tokens else cfg.bos_id
            probs, trace, new_state = decoder.step(hyp.state, prev)
            adj = scorer.adjust(probs, hyp.tokens)
            for y in np.flatnonzero(adj > 0.0):
                candidates.append((hyp.score + math.log(adj[y]), h_idx, int(y), new_state, trace))
        if not candidates:
            break
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        live_next = []
        for score, h_idx, y, new_state, trace in candidates[: cfg.beam_width]:
            parent = live[h_idx]
            hyp = Hypothesis(
                parent.tokens + [y], score, new_state, parent.emitted | {y}, parent.traces + [dict(trace, token=y)]
            )
            (finished if y == cfg.eos_id else live_next).append(hyp)
        live = live_next
        if not live:
            break
    pool = finished + live
    best = pool[0]
    for hyp in pool[1:]:
        if hyp.score > best.score:
            best = hyp
    return best


def exhaustive_search(decoder, cfg: DecodeConfig, vocab_size: int, scorer: Scorer | None = None) -> tuple[list[int], float]:
    """Brute-force best sequence (reference for tiny instances)."""
    scorer = scorer or Scorer(cfg)
    best: tuple[list[int], float] = ([], -math.inf)

    def rec(state, prev, tokens, score):
        nonlocal best
        if len(tokens) == cfg.max_len:
            if score > best[1]:
                best = (list(tokens), score)
            return
        probs, _, new_state = decoder.step(state, prev)
        adj = scorer.adjust(probs, tokens)
        for y in range(vocab_size):
            if adj[y] <= 0.0:
                continue
            s = score + math.log(adj[y])
            if y == cfg.eos_id:
                if s > best[1]:
                    best = (tokens + [y], s)
            else:
                rec(new_state, y, tokens + [y], s)

    rec(decoder.init(), cfg.bos_id, [], 0.0)
    return best


def decode(decoder, cfg: DecodeConfig, scorer: Scorer | None = None) -> Hypothesis:
    if cfg.beam_width == 1:
        return greedy_decode(decoder, cfg, scorer)
    return beam_search(decoder, cfg, scorer)


def resolve_tokens(ids: Sequence[int], ext: ExtendedVocab, strip_eos: bool = True) -> list[str]:
    words = ext.resolve(ids)
    if strip_eos and words and words[-1] == "<eos>":
        words = words[:-1]
    return words


# -- adapter for the trained model ---------------------------------------------

class ModelDecoder:
    """Runs a CaptionModel on one sample, one step at a time (no graph)."""

    def __init__(self, model, sample: Sample, vocab: Vocabulary, max_context_len: int | None = None):
        self.model = model
        self.vocab = vocab
        self.batch = make_batch(
            [sample],
            vocab,
            max_len=2,
            max_context_len=max_context_len,
            use_context=model.uses_context,
            zero_video=not model.uses_video,
            dtype=model.params.dtype,
        )
        self.ext = self.batch.ext[0]
        self.V = len(vocab)

    def init(self):
        with no_grad():
            return self.model.start(self.batch)

    def step(self, state, token: int):
        inp = token if token < self.V else self.vocab.unk
        with no_grad():
            out, new, eta = self.model.step(state, np.array([inp]))
        probs = np.asarray(out.p_final.data[0], dtype=np.float64)
        trace = {
            "p_gen": float(out.p_gen.data.reshape(-1)[0]),
            "attention": out.xi.data[0].astype(float).tolist(),
            "coverage": out.coverage_after.data[0].astype(float).tolist(),
            "temporal_attention": eta.data[0].astype(float).tolist(),
        }
        return probs, trace, new


def special_ids(vocab: Vocabulary) -> tuple[list[int], list[int]]:
    """(penalty-exempt ids, never-emitted ids) for a vocabulary."""
    exempt = [i for i, t in enumerate(vocab.itos) if is_special(t) or is_punct(t)]
    banned = [vocab.pad, vocab.bos]
    return exempt, banned


def caption_sample(model, sample: Sample, vocab: Vocabulary, cfg: DecodeConfig, max_context_len=None):
    """Decode one sample.  Returns (words, hypothesis, step traces)."""
    dec = ModelDecoder(model, sample, vocab, max_context_len)
    exempt, banned = special_ids(vocab)
    hyp = decode(dec, cfg, Scorer(cfg, exempt, banned))
    words = resolve_tokens(hyp.tokens, dec.ext)
    traces = [
        StepTrace(i, t["token"], dec.ext.word(t["token"]), t["p_gen"], t["attention"], t["coverage"], t["temporal_attention"])
        for i, t in enumerate(hyp.traces)
    ]
    return words, hyp, traces


def caption_best_of(model, samples: Sequence[Sample], vocab: Vocabulary, cfg: DecodeConfig, max_context_len=None):
    """Decode one clip paired with several contexts; keep the most probable."""
    best = None
    for s in samples:
        result = caption_sample(model, s, vocab, cfg, max_context_len)
        if best is None or result[1].score > best[1].score:
            best = result
    return best
