"""Staged teacher-forced training with Adam and early stopping.

Stages, in their canonical order:

``pretrain-s2vt``  video path only (no context) on the ``pretrain`` split
                   when it has samples, else on ``train``
``frozen-top``     full model; top LSTM and frame embedding held fixed
``end-to-end``     everything trainable

Every epoch draws its shuffling and dropout masks from a generator seeded
by (seed, stage index, epoch), and every stage starts from a fresh Adam
state, so running stages in separate processes (via checkpoints) gives the
same parameters as running them back to back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import STAGES, ExperimentConfig
from .corpus.manifest import DatasetManifest
from .data import Sample, make_batch
from .gradcheck import NumericError
from .model import CaptionModel, ModelConfig
from .optim import AdamState, adam_step, clip_grad_norm
from .params import load_checkpoint, save_checkpoint
from .tensor import no_grad
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    stage: str
    epoch: int
    train_loss: float
    val_loss: float | None
    step_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "step_losses": self.step_losses,
        }


@dataclass
class TrainResult:
    model: CaptionModel
    curve: list[EpochRecord]

    def curve_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.curve]


def build_model(cfg: ExperimentConfig, vocab: Vocabulary, variant: str | None = None, dtype=np.float32) -> CaptionModel:
    mc = ModelConfig(
        s2vt=cfg.s2vt,
        vocab_size=len(vocab),
        context_hidden=cfg.context_hidden,
        dropout=cfg.dropout,
        coverage_weight=cfg.coverage_weight,
        variant=variant or cfg.variant,
    )
    return CaptionModel(mc, seed=cfg.seed, dtype=dtype)


def save_model(path, model: CaptionModel, cfg: ExperimentConfig, vocab: Vocabulary, extra: dict | None = None) -> None:
    meta = {"config": cfg.to_dict(), "variant": model.variant, "vocab": vocab.itos}
    meta.update(extra or {})
    save_checkpoint(path, model.params.state(), meta)


def load_model(path, dtype=np.float32) -> tuple[CaptionModel, ExperimentConfig, Vocabulary, dict]:
    tensors, meta = load_checkpoint(path)
    cfg = ExperimentConfig.from_dict(meta["config"])
    vocab = Vocabulary(meta["vocab"])
    model = build_model(cfg, vocab, meta.get("variant"), dtype)
    model.params.load_state(tensors)
    return model, cfg, vocab, meta


def stage_rng(seed: int, stage: str, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, STAGES.index(stage), epoch])


class _StageVariant:
    """Temporarily run the model as a different variant."""

    def __init__(self, model: CaptionModel, variant: str):
        self.model, self.variant = model, variant

    def __enter__(self):
        self.saved = self.model.cfg.variant
        self.model.cfg.variant = self.variant

    def __exit__(self, *exc):
        self.model.cfg.variant = self.saved


def _batches(model, samples, vocab, cfg, order):
    for i in range(0, len(order), cfg.batch_size):
        chunk = [samples[j] for j in order[i:i + cfg.batch_size]]
        yield make_batch(
            chunk,
            vocab,
            cfg.s2vt.T_dec,
            cfg.max_context_len,
            use_context=model.uses_context,
            zero_video=not model.uses_video,
            dtype=model.params.dtype,
        )


def evaluate_loss(model: CaptionModel, samples: Sequence[Sample], vocab: Vocabulary, cfg: ExperimentConfig) -> float:
    """Sample-weighted mean loss without dropout."""
    total = 0.0
    with no_grad():
        for batch in _batches(model, samples, vocab, cfg, np.arange(len(samples))):
            total += float(model.loss(batch).data) * batch.size
    return total / max(1, len(samples))


def train_stage(
    model: CaptionModel,
    stage: str,
    train: Sequence[Sample],
    val: Sequence[Sample],
    vocab: Vocabulary,
    cfg: ExperimentConfig,
    epochs: int | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> list[EpochRecord]:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if not train:
        raise ValueError(f"stage {stage}: no training samples")
    epochs = cfg.epochs.get(stage, 0) if epochs is None else epochs
    freeze = stage == "frozen-top" or cfg.freeze_top_lstm
    names = model.parameter_names(freeze_top=freeze)
    model.params.set_trainable(names)
    opt = AdamState(learning_rate=cfg.learning_rate)
    best_val, best_state, stale = math.inf, None, 0
    records: list[EpochRecord] = []
    last_finite = None
    for epoch in range(epochs):
        rng = stage_rng(cfg.seed, stage, epoch)
        order = rng.permutation(len(train))
        losses = []
        for step, batch in enumerate(_batches(model, train, vocab, cfg, order)):
            loss = model.loss(batch, training=True, rng=rng)
            value = float(loss.data)
            if not math.isfinite(value):
                model.params.zero_grad()
                raise NumericError(
                    f"stage {stage}, epoch {epoch}, step {step}: loss is {value}; "
                    f"last finite loss was {last_finite[2]:.6g} at epoch {last_finite[0]}, step {last_finite[1]}"
                    if last_finite else f"stage {stage}: loss is {value} at the first step"
                )
            last_finite = (epoch, step, value)
            loss.backward()
            if cfg.grad_clip:
                clip_grad_norm(model.params, names, cfg.grad_clip)
            adam_step(model.params, opt, names)
            losses.append(value)
        val_loss = evaluate_loss(model, val, vocab, cfg) if val else None
        rec = EpochRecord(stage, epoch, float(np.mean(losses)), val_loss, losses)
        records.append(rec)
        log.info("%s epoch %d: train %.4f val %s", stage, epoch, rec.train_loss, val_loss)
        if on_epoch:
            on_epoch(rec)
        if val_loss is None:
            continue
        if val_loss < best_val:
            best_val, best_state, stale = val_loss, model.params.state(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best_state is not None:
        model.params.load_state(best_state)
    model.params.set_trainable(model.params.names())
    return records


def train(
    cfg: ExperimentConfig,
    manifest: DatasetManifest,
    vocab: Vocabulary,
    stages: Sequence[str] | None = None,
    model: CaptionModel | None = None,
    checkpoint_dir=None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Run ``stages`` in order and return the model with its loss curve.

    With ``checkpoint_dir`` each stage leaves ``<stage>.ckpt`` behind.
    """
    stages = list(cfg.stages if stages is None else stages)
    for s in stages:
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r}")
    if model is None:
        if cfg.load_checkpoint:
            model = load_model(cfg.load_checkpoint)[0]
        else:
            model = build_model(cfg, vocab)
    main = manifest.samples("train")
    val = manifest.samples("val")
    pretrain = manifest.samples("pretrain")
    curve: list[EpochRecord] = []
    for stage in stages:
        if stage == "pretrain-s2vt":
            with _StageVariant(model, "video_only"):
                curve += train_stage(model, stage, pretrain or main, val, vocab, cfg, on_epoch=on_epoch)
        else:
            curve += train_stage(model, stage, main, val, vocab, cfg, on_epoch=on_epoch)
        if checkpoint_dir is not None:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
            save_model(Path(checkpoint_dir) / f"{stage}.ckpt", model, cfg, vocab, {"stage": stage})
    return TrainResult(model, curve)
