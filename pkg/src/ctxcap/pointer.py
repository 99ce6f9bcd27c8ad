"""Context encoder and pointer-generator output layer.

At each decoding step the bottom-layer state attends over the encoded
context (with a coverage feature), the attended context vector feeds the
vocabulary distribution, and a generation probability mixes that
distribution with the copy distribution over context positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .params import ParamStore
from .s2vt import make_lstm, run_bilstm
from .tensor import Tensor

PROB_FLOOR = 1e-12


@dataclass
class ContextEncoding:
    h: Tensor                 # (B, M, 2 * context_hidden)
    keys: Tensor              # (B, M, A): h projected by W_h
    mask: np.ndarray          # (B, M) bool, True on real tokens


@dataclass
class StepOutput:
    xi: Tensor
    p_vocab: Tensor
    p_gen: Tensor
    p_final: Tensor
    coverage_after: Tensor
    h_star: Tensor


class PointerGenerator:
    def __init__(
        self,
        params: ParamStore,
        vocab_size: int,
        word_dim: int,
        decoder_dim: int,
        context_hidden: int = 256,
        attention_dim: int | None = None,
        output_hidden: int | None = None,
        dropout: float = 0.0,
    ):
        self.params = params
        self.vocab_size = vocab_size
        self.context_hidden = context_hidden
        self.dropout = dropout
        A = attention_dim or decoder_dim
        D = 2 * context_hidden
        self.context_dim = D
        make_lstm(params, "ptr.ctx_fw", word_dim, context_hidden)
        make_lstm(params, "ptr.ctx_bw", word_dim, context_hidden)
        params.create("ptr.attn.W_h", (D, A))
        params.create("ptr.attn.W_s", (decoder_dim, A))
        params.create("ptr.attn.w_c", (1, A))
        params.create("ptr.attn.b", (A,))
        params.create("ptr.attn.u", (A, 1))
        hidden = output_hidden or decoder_dim
        params.create("ptr.out.W", (decoder_dim + D, hidden))
        params.create("ptr.out.b", (hidden,))
        params.create("ptr.out.W2", (hidden, vocab_size))
        params.create("ptr.out.b2", (vocab_size,))
        params.create("ptr.gen.w_h", (D, 1))
        params.create("ptr.gen.w_s", (decoder_dim, 1))
        params.create("ptr.gen.w_x", (word_dim, 1))
        params.create("ptr.gen.b", (1,))

    def encode_context(self, embedded: Tensor, mask: np.ndarray, training: bool = False, rng=None) -> ContextEncoding:
        """Bidirectional LSTM over embedded context words (B, M, E)."""
        mask = np.asarray(mask, dtype=bool)
        if embedded.shape[1] == 0 or not mask.any(axis=1).all():
            raise ValueError("context must contain at least one token")
        x = T.dropout(embedded, self.dropout, training, rng)
        hs_f, hs_b, _ = run_bilstm(x, self.params, "ptr.ctx_fw", "ptr.ctx_bw", self.context_hidden, mask)
        h = T.stack([T.concat([f, b], axis=-1) for f, b in zip(hs_f, hs_b)], axis=1)
        h = T.dropout(h, self.dropout, training, rng)
        return ContextEncoding(h, h @ self.params["ptr.attn.W_h"], mask)

    def attention(self, enc: ContextEncoding, s_bottom: Tensor, coverage: Tensor) -> Tensor:
        """beta_i = u . tanh(W_h h_i + W_s s + w_c c_i + b); xi = softmax(beta)."""
        p = self.params
        B, M = enc.mask.shape
        q = s_bottom @ p["ptr.attn.W_s"] + p["ptr.attn.b"]
        cov = coverage.reshape(B, M, 1) * p["ptr.attn.w_c"]
        feat = T.tanh(enc.keys + q.reshape(B, 1, q.shape[-1]) + cov)
        beta = (feat @ p["ptr.attn.u"]).reshape(B, M)
        return T.softmax(beta, axis=-1, mask=enc.mask)

    @staticmethod
    def context_vector(enc: ContextEncoding, xi: Tensor) -> Tensor:
        return T.einsum("bm,bmd->bd", xi, enc.h)

    def vocab_distribution(self, s_bottom: Tensor, h_star: Tensor) -> Tensor:
        p = self.params
        hidden = T.concat([s_bottom, h_star], axis=-1) @ p["ptr.out.W"] + p["ptr.out.b"]
        return T.softmax(hidden @ p["ptr.out.W2"] + p["ptr.out.b2"], axis=-1)

    def generation_prob(self, h_star: Tensor, s_bottom: Tensor, x_t: Tensor) -> Tensor:
        p = self.params
        z = h_star @ p["ptr.gen.w_h"] + s_bottom @ p["ptr.gen.w_s"] + x_t @ p["ptr.gen.w_x"] + p["ptr.gen.b"]
        return T.sigmoid(z)

    def step(self, enc: ContextEncoding, s_bottom: Tensor, x_t: Tensor, coverage: Tensor, copy_map: np.ndarray) -> StepOutput:
        xi = self.attention(enc, s_bottom, coverage)
        h_star = self.context_vector(enc, xi)
        p_vocab = self.vocab_distribution(s_bottom, h_star)
        p_gen = self.generation_prob(h_star, s_bottom, x_t)
        p_final = final_distribution(p_vocab, xi, p_gen, copy_map)
        return StepOutput(xi, p_vocab, p_gen, p_final, update_coverage(coverage, xi), h_star)


def update_coverage(coverage: Tensor, xi: Tensor) -> Tensor:
    return coverage + xi


def copy_matrix(ext_ids: np.ndarray, mask: np.ndarray, ext_size: int, dtype=np.float64) -> np.ndarray:
    """One-hot (B, M, ext_size) map from context positions to extended ids.
    Padded positions map nowhere."""
    ext_ids = np.asarray(ext_ids)
    B, M = ext_ids.shape
    out = np.zeros((B, M, ext_size), dtype=dtype)
    b, m = np.nonzero(np.asarray(mask, dtype=bool))
    out[b, m, ext_ids[b, m]] = 1.0
    return out


def final_distribution(p_vocab: Tensor, xi: Tensor, p_gen: Tensor, copy_map: np.ndarray) -> Tensor:
    """P(y) = p_gen P_vocab(y) + (1 - p_gen) sum_{i: z_i = y} xi_i over the
    extended index space; ``copy_map`` is the output of ``copy_matrix``."""
    B, V = p_vocab.shape
    ext = copy_map.shape[-1]
    if ext > V:
        p_vocab = T.concat([p_vocab, Tensor(np.zeros((B, ext - V), dtype=p_vocab.dtype))], axis=-1)
    copy = T.einsum("bm,bmv->bv", xi, Tensor(copy_map.astype(p_vocab.dtype, copy=False)))
    p_gen = p_gen.reshape(B, 1)
    return p_gen * p_vocab + (1.0 - p_gen) * copy


def coverage_penalty(xi: Tensor, coverage: Tensor) -> Tensor:
    """sum_i min(xi_i, c_i) per row."""
    return T.minimum(xi, coverage).sum(axis=-1)


def step_loss(p_final: Tensor, target: np.ndarray, xi: Tensor | None, coverage: Tensor | None, lam: float) -> Tensor:
    """Per-row loss -log P(target) + lam * sum_i min(xi_i, c_i)."""
    nll = -T.log(T.gather_last(p_final, np.asarray(target)), floor=PROB_FLOOR)
    if lam and xi is not None:
        nll = nll + lam * coverage_penalty(xi, coverage)
    return nll
