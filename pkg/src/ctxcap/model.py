"""Full contextual captioning model: S2VT stack + pointer-generator.

Variants:

``full``          video encoder and pointer-generator
``video_only``    no context; p_gen fixed at 1 and the context vector is zero
``context_only``  frame features replaced by zeros
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import Batch
from .params import ParamStore
from .pointer import ContextEncoding, PointerGenerator, StepOutput, step_loss
from .s2vt import S2VT, EncoderOutputs, LstmState, S2VTConfig
from .tensor import Tensor

VARIANTS = ("full", "video_only", "context_only")


@dataclass
class ModelConfig:
    s2vt: S2VTConfig = field(default_factory=S2VTConfig)
    vocab_size: int = 20000
    context_hidden: int = 256
    dropout: float = 0.5
    coverage_weight: float = 1.0
    variant: str = "full"

    def __post_init__(self):
        if isinstance(self.s2vt, dict):
            self.s2vt = S2VTConfig(**self.s2vt)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")


@dataclass
class DecoderState:
    enc: EncoderOutputs
    ctx: ContextEncoding | None
    top: LstmState
    bottom: LstmState
    coverage: Tensor
    copy_map: np.ndarray


class CaptionModel:
    def __init__(self, config: ModelConfig, params: ParamStore | None = None, seed: int = 0, dtype=np.float32):
        self.cfg = config
        self.params = params if params is not None else ParamStore(seed, dtype)
        s = config.s2vt
        self.params.create("embed.words", (config.vocab_size, s.word_embed_dim))
        self.s2vt = S2VT(s, self.params, config.dropout)
        self.pointer = PointerGenerator(
            self.params,
            config.vocab_size,
            s.word_embed_dim,
            s.hidden_dim,
            context_hidden=config.context_hidden,
            attention_dim=s.attention_dim,
            dropout=config.dropout,
        )

    @property
    def variant(self) -> str:
        return self.cfg.variant

    @property
    def uses_context(self) -> bool:
        return self.variant != "video_only"

    @property
    def uses_video(self) -> bool:
        return self.variant != "context_only"

    def parameter_names(self, freeze_top: bool = False) -> list[str]:
        """Parameters that receive gradients for this variant."""
        names = self.params.names()
        if not self.uses_context:
            names = [n for n in names if not n.startswith(("ptr.ctx_", "ptr.attn.", "ptr.gen."))]
        if freeze_top:
            names = [n for n in names if not n.startswith(S2VT.top_prefixes)]
        return names

    def frozen_names(self) -> list[str]:
        return [n for n in self.params.names() if n.startswith(S2VT.top_prefixes)]

    # -- shared pieces ----------------------------------------------------
    def _embed(self, ids: np.ndarray) -> Tensor:
        return T.embedding(self.params["embed.words"], ids)

    def start(self, batch: Batch, training: bool = False, rng=None) -> DecoderState:
        frames = np.zeros_like(batch.frames) if not self.uses_video else batch.frames
        enc = self.s2vt.encode(frames, training, rng)
        B = batch.size
        dtype = self.params.dtype
        ctx = None
        if self.uses_context:
            ctx = self.pointer.encode_context(self._embed(batch.ctx_ids), batch.ctx_mask, training, rng)
        coverage = Tensor(np.zeros(batch.ctx_mask.shape, dtype=dtype))
        return DecoderState(enc, ctx, enc.top_forward, enc.bottom, coverage, batch.copy_map)

    def step(self, state: DecoderState, prev_ids: np.ndarray, training: bool = False, rng=None):
        """Advance one decoding step given the previous word ids (global space).

        Returns (StepOutput, new state, temporal attention weights).
        """
        x_t = T.dropout(self._embed(prev_ids), self.cfg.dropout, training, rng)
        s_bottom, top, bottom, eta = self.s2vt.decode_step(x_t, state.enc, state.top, state.bottom, training, rng)
        if self.uses_context:
            out = self.pointer.step(state.ctx, s_bottom, x_t, state.coverage, state.copy_map)
        else:
            out = self._video_only_step(s_bottom, state)
        new = DecoderState(state.enc, state.ctx, top, bottom, out.coverage_after, state.copy_map)
        return out, new, eta

    def _video_only_step(self, s_bottom: Tensor, state: DecoderState) -> StepOutput:
        B = s_bottom.shape[0]
        dtype = self.params.dtype
        h_star = Tensor(np.zeros((B, self.pointer.context_dim), dtype=dtype))
        p_vocab = self.pointer.vocab_distribution(s_bottom, h_star)
        ext = state.copy_map.shape[-1]
        V = p_vocab.shape[-1]
        p_final = p_vocab
        if ext > V:
            p_final = T.concat([p_vocab, Tensor(np.zeros((B, ext - V), dtype=dtype))], axis=-1)
        M = state.coverage.shape[-1]
        xi = Tensor(np.zeros((B, M), dtype=dtype))
        return StepOutput(xi, p_vocab, Tensor(np.ones((B, 1), dtype=dtype)), p_final, state.coverage, h_star)

    # -- training objective -----------------------------------------------
    def loss(self, batch: Batch, training: bool = False, rng=None) -> Tensor:
        """Mean over samples of the mean per-step loss over valid decode steps."""
        state = self.start(batch, training, rng)
        lam = self.cfg.coverage_weight if self.uses_context else 0.0
        steps = []
        for t in range(batch.dec_in.shape[1]):
            if not batch.tgt_mask[:, t].any():
                break
            prev_cov = state.coverage
            out, state, _ = self.step(state, batch.dec_in[:, t], training, rng)
            steps.append(step_loss(out.p_final, batch.targets[:, t], out.xi, prev_cov, lam))
        per_step = T.stack(steps, axis=1)
        mask = batch.tgt_mask[:, : len(steps)].astype(self.params.dtype)
        weights = mask / mask.sum(axis=1, keepdims=True) / batch.size
        return (per_step * weights).sum()
