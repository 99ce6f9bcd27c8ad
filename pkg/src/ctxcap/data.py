"""Samples and batch assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pointer import copy_matrix
from .vocab import ExtendedVocab, Vocabulary


@dataclass
class Sample:
    clip_id: str
    features: np.ndarray            # (frames, feature_dim)
    context: list[str]
    caption: list[str]
    names: frozenset[str] = frozenset()
    movie_id: str = ""
    split: str = "train"


@dataclass
class Batch:
    frames: np.ndarray              # (B, L, F)
    ctx_ids: np.ndarray             # (B, M) global ids, OOV -> UNK
    ctx_mask: np.ndarray            # (B, M) bool
    copy_map: np.ndarray            # (B, M, V + K)
    dec_in: np.ndarray              # (B, T) global ids, teacher-forced inputs
    targets: np.ndarray             # (B, T) extended ids
    tgt_mask: np.ndarray            # (B, T) bool
    ext: list[ExtendedVocab] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.frames.shape[0]


def make_batch(
    samples: Sequence[Sample],
    vocab: Vocabulary,
    max_len: int,
    max_context_len: int | None = None,
    use_context: bool = True,
    zero_video: bool = False,
    dtype=np.float32,
) -> Batch:
    """Pad a list of samples into dense arrays.

    Captions are cut to ``max_len - 1`` words plus EOS.  Without context the
    extended space equals the global vocabulary, so unseen caption words
    become UNK targets.
    """
    B = len(samples)
    V = len(vocab)
    L = max(s.features.shape[0] for s in samples)
    Fd = samples[0].features.shape[1]
    frames = np.zeros((B, L, Fd), dtype=dtype)
    if not zero_video:
        for b, s in enumerate(samples):
            frames[b, : s.features.shape[0]] = s.features

    contexts = [list(s.context[:max_context_len]) if max_context_len else list(s.context) for s in samples]
    if not use_context:
        contexts = [[] for _ in samples]
    exts = [ExtendedVocab.from_context(vocab, c) for c in contexts]
    M = max(1, max(len(c) for c in contexts))
    K = max(len(e.oov) for e in exts)
    ctx_ids = np.full((B, M), vocab.pad, dtype=np.int64)
    ctx_ext = np.zeros((B, M), dtype=np.int64)
    ctx_mask = np.zeros((B, M), dtype=bool)
    for b, (c, e) in enumerate(zip(contexts, exts)):
        if not c:
            ctx_mask[b, 0] = True
            continue
        ctx_ids[b, : len(c)] = vocab.encode(c)
        ctx_ext[b, : len(c)] = e.encode(c)
        ctx_mask[b, : len(c)] = True
    copy_map = copy_matrix(ctx_ext, ctx_mask & (ctx_ids != vocab.pad) if use_context else np.zeros_like(ctx_mask), V + K, dtype)

    dec_in = np.full((B, max_len), vocab.pad, dtype=np.int64)
    targets = np.full((B, max_len), vocab.pad, dtype=np.int64)
    tgt_mask = np.zeros((B, max_len), dtype=bool)
    for b, (s, e) in enumerate(zip(samples, exts)):
        words = list(s.caption[: max_len - 1])
        tgt = e.encode(words) + [vocab.eos]
        inp = [vocab.bos] + vocab.encode(words)
        n = len(tgt)
        targets[b, :n] = tgt
        dec_in[b, :n] = inp
        tgt_mask[b, :n] = True
    return Batch(frames, ctx_ids, ctx_mask, copy_map, dec_in, targets, tgt_mask, exts)
