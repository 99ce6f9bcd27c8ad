"""Stacked two-layer encoder-decoder with temporal attention.

The top layer is a bidirectional LSTM over embedded frame features; the
bottom layer is a unidirectional LSTM that reads ``[word, top state, frame
context]``.  Both layers share one unrolled timeline: ``T_enc`` encoding
steps followed by ``T_dec`` decoding steps.

All vectors carry a leading batch axis, so a single sample is a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .params import ParamStore
from .tensor import ShapeError, Tensor


@dataclass
class S2VTConfig:
    T_enc: int = 10
    T_dec: int = 30
    video_feature_dim: int = 4096
    video_embed_dim: int = 500
    word_embed_dim: int = 300
    hidden_dim: int = 512
    attention_dim: int | None = None

    def __post_init__(self):
        for name in ("T_enc", "T_dec", "video_feature_dim", "video_embed_dim", "word_embed_dim", "hidden_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (bidirectional halves are concatenated)")
        if self.attention_dim is None:
            self.attention_dim = self.hidden_dim


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


@dataclass
class EncoderOutputs:
    top_states: Tensor          # (B, T_enc, H): attention values
    keys: Tensor                # (B, T_enc, A): top states projected by W_1
    top_forward: LstmState      # forward-direction state after the last frame
    bottom: LstmState           # bottom-layer state after the last frame


def make_lstm(params: ParamStore, prefix: str, input_dim: int, hidden: int) -> None:
    params.create(f"{prefix}.W_x", (input_dim, 4 * hidden))
    params.create(f"{prefix}.W_h", (hidden, 4 * hidden))
    params.create(f"{prefix}.b", (4 * hidden,))


def zero_state(batch: int, hidden: int, dtype) -> LstmState:
    z = Tensor(np.zeros((batch, hidden), dtype=dtype))
    return LstmState(z, z)


def lstm_cell(x_proj: Tensor, state: LstmState, params: ParamStore, prefix: str) -> LstmState:
    """LSTM update from an input already multiplied by ``W_x``.

    Gate layout along the last axis: input, forget, output, candidate.
    """
    H = state.h.shape[-1]
    gates = x_proj + state.h @ params[f"{prefix}.W_h"] + params[f"{prefix}.b"]
    ifo = T.sigmoid(gates[:, : 3 * H])
    cand = T.tanh(gates[:, 3 * H:])
    c = ifo[:, H: 2 * H] * state.c + ifo[:, :H] * cand
    h = ifo[:, 2 * H:] * T.tanh(c)
    return LstmState(h, c)


def lstm_step(x: Tensor, state: LstmState, params: ParamStore, prefix: str) -> LstmState:
    W_x = params[f"{prefix}.W_x"]
    if x.shape[-1] != W_x.shape[0] or state.h.shape[-1] * 4 != W_x.shape[1]:
        raise ShapeError(f"lstm_step {prefix}: input {x.shape} / state {state.h.shape} do not fit W_x {W_x.shape}")
    return lstm_cell(x @ W_x, state, params, prefix)


def _masked_update(new: LstmState, old: LstmState, keep: np.ndarray | None) -> LstmState:
    if keep is None:
        return new
    m = keep[:, None].astype(new.h.dtype)
    return LstmState(new.h * m + old.h * (1.0 - m), new.c * m + old.c * (1.0 - m))


def run_bilstm(
    inputs: Tensor,
    params: ParamStore,
    fw: str,
    bw: str,
    hidden: int,
    mask: np.ndarray | None = None,
) -> tuple[list[Tensor], list[Tensor], LstmState]:
    """Run forward and backward LSTMs over ``inputs`` (B, L, D).

    With a mask, padded positions leave the recurrent state untouched, so
    the backward direction starts at each row's last real position.
    Returns per-position forward and backward hidden states and the final
    forward state.
    """
    B, L, _ = inputs.shape
    proj_f = inputs @ params[f"{fw}.W_x"]
    proj_b = inputs @ params[f"{bw}.W_x"]
    state_f = zero_state(B, hidden, inputs.dtype)
    state_b = zero_state(B, hidden, inputs.dtype)
    hs_f: list[Tensor] = []
    hs_b: list[Tensor | None] = [None] * L
    for t in range(L):
        keep = None if mask is None else mask[:, t]
        state_f = _masked_update(lstm_cell(proj_f[:, t], state_f, params, fw), state_f, keep)
        hs_f.append(state_f.h)
    for t in reversed(range(L)):
        keep = None if mask is None else mask[:, t]
        state_b = _masked_update(lstm_cell(proj_b[:, t], state_b, params, bw), state_b, keep)
        hs_b[t] = state_b.h
    return hs_f, hs_b, state_f


class S2VT:
    """Parameters and forward computations of the stacked video network."""

    def __init__(self, config: S2VTConfig, params: ParamStore, dropout: float = 0.0):
        self.cfg = config
        self.params = params
        self.dropout = dropout
        c = config
        half = c.hidden_dim // 2
        params.create("s2vt.embed.W", (c.video_feature_dim, c.video_embed_dim))
        params.create("s2vt.embed.b", (c.video_embed_dim,))
        make_lstm(params, "s2vt.top_fw", c.video_embed_dim, half)
        make_lstm(params, "s2vt.top_bw", c.video_embed_dim, half)
        make_lstm(params, "s2vt.bottom", c.word_embed_dim + 2 * c.hidden_dim, c.hidden_dim)
        params.create("s2vt.attn.W1", (c.hidden_dim, c.attention_dim))
        params.create("s2vt.attn.W2", (c.hidden_dim, c.attention_dim))
        params.create("s2vt.attn.b", (c.attention_dim,))
        params.create("s2vt.attn.v", (c.attention_dim, 1))

    top_prefixes = ("s2vt.embed.", "s2vt.top_fw.", "s2vt.top_bw.")

    def _drop(self, x: Tensor, training: bool, rng) -> Tensor:
        return T.dropout(x, self.dropout, training, rng)

    def embed_frames(self, features) -> Tensor:
        """Shared per-frame affine map (B, L, F) -> (B, L, video_embed_dim)."""
        features = T.as_tensor(features, self.params["s2vt.embed.W"])
        if features.shape[-1] != self.cfg.video_feature_dim:
            raise ShapeError(
                f"frame features have dim {features.shape[-1]}, expected {self.cfg.video_feature_dim}"
            )
        return features @ self.params["s2vt.embed.W"] + self.params["s2vt.embed.b"]

    def encode(self, features, training: bool = False, rng=None) -> EncoderOutputs:
        """Encoding stage over (B, L, F) features, L <= T_enc.

        Frames are right-padded with zeros to T_enc.  The bottom layer reads
        zero word and zero frame-context inputs during this stage.
        """
        feats = np.asarray(features.data if isinstance(features, Tensor) else features)
        if feats.ndim == 2:
            feats = feats[None]
        B, L, F = feats.shape
        if L == 0:
            raise ValueError("cannot encode an empty video")
        if L > self.cfg.T_enc:
            raise ShapeError(f"video has {L} frames, more than T_enc={self.cfg.T_enc}")
        dtype = self.params.dtype
        padded = np.zeros((B, self.cfg.T_enc, F), dtype=dtype)
        padded[:, :L] = feats
        x = self._drop(Tensor(padded), training, rng)
        v = self.embed_frames(x)
        half = self.cfg.hidden_dim // 2
        hs_f, hs_b, last_f = run_bilstm(v, self.params, "s2vt.top_fw", "s2vt.top_bw", half)
        tops = [self._drop(T.concat([f, b], axis=-1), training, rng) for f, b in zip(hs_f, hs_b)]

        H = self.cfg.hidden_dim
        bottom = zero_state(B, H, dtype)
        pad_word = Tensor(np.zeros((B, self.cfg.word_embed_dim), dtype=dtype))
        pad_ctx = Tensor(np.zeros((B, H), dtype=dtype))
        for s_top in tops:
            bottom = lstm_step(T.concat([pad_word, s_top, pad_ctx], axis=-1), bottom, self.params, "s2vt.bottom")
        top_states = T.stack(tops, axis=1)
        keys = top_states @ self.params["s2vt.attn.W1"]
        return EncoderOutputs(top_states, keys, last_f, bottom)

    def temporal_attention(self, enc: EncoderOutputs, query: Tensor) -> tuple[Tensor, Tensor]:
        """Additive attention over the top-layer encoder states.

        Returns the frame context vector (B, H) and the weights (B, T_enc).
        """
        p = self.params
        q = query @ p["s2vt.attn.W2"] + p["s2vt.attn.b"]
        feat = T.tanh(enc.keys + q.reshape(q.shape[0], 1, q.shape[1]))
        scores = (feat @ p["s2vt.attn.v"]).reshape(feat.shape[0], feat.shape[1])
        eta = T.softmax(scores, axis=-1)
        return T.einsum("bt,bth->bh", eta, enc.top_states), eta

    def decode_step(
        self,
        x_t: Tensor,
        enc: EncoderOutputs,
        top: LstmState,
        bottom: LstmState,
        training: bool = False,
        rng=None,
    ) -> tuple[Tensor, LstmState, LstmState, Tensor]:
        """One decoding step.

        The top layer advances its forward direction on a zero frame; its
        backward half is zero-filled.  Returns the (dropped-out) bottom
        output, the new top and bottom states, and the attention weights.
        """
        if enc is None:
            raise RuntimeError("decode_step called before encode")
        dtype = self.params.dtype
        B = x_t.shape[0]
        half = self.cfg.hidden_dim // 2
        zero_frame = Tensor(np.zeros((B, self.cfg.video_embed_dim), dtype=dtype))
        top = lstm_step(zero_frame, top, self.params, "s2vt.top_fw")
        s_top = self._drop(T.concat([top.h, Tensor(np.zeros((B, half), dtype=dtype))], axis=-1), training, rng)
        s_star, eta = self.temporal_attention(enc, bottom.h)
        bottom = lstm_step(T.concat([x_t, s_top, s_star], axis=-1), bottom, self.params, "s2vt.bottom")
        return self._drop(bottom.h, training, rng), top, bottom, eta
