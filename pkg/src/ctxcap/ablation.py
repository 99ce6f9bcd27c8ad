"""Caption generation over a manifest split and variant ablations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .config import ExperimentConfig
from .corpus.manifest import DatasetManifest
from .decoding import DecodeConfig, StepTrace, caption_sample
from .metrics import ALL_METRICS, ScoreReport, evaluate
from .model import CaptionModel, VARIANTS
from .training import TrainResult, build_model, train
from .vocab import Vocabulary


@dataclass
class Prediction:
    clip_id: str
    words: list[str]
    reference: list[str]
    names: list[str]
    context: list[str]
    score: float
    traces: list[StepTrace] = field(default_factory=list)

    def to_dict(self, with_traces: bool = False) -> dict:
        d = {
            "clip_id": self.clip_id,
            "prediction": self.words,
            "reference": self.reference,
            "score": self.score,
        }
        if with_traces:
            d["context"] = self.context
            d["trace"] = [t.__dict__ for t in self.traces]
        return d


def generate(
    model: CaptionModel,
    manifest: DatasetManifest,
    vocab: Vocabulary,
    decode_cfg: DecodeConfig,
    split: str = "test",
    max_context_len: int | None = None,
    limit: int | None = None,
) -> list[Prediction]:
    """Caption every clip of ``split``.  A clip listed with several contexts
    is decoded once per context and the most probable caption kept."""
    groups: dict[str, list] = {}
    for r in manifest.split(split):
        groups.setdefault(r.clip_id, []).append(r)
    out = []
    for clip in sorted(groups)[:limit]:
        recs = groups[clip]
        samples = [manifest.sample(r) for r in recs]
        best = None
        for s in samples:
            words, hyp, traces = caption_sample(model, s, vocab, decode_cfg, max_context_len)
            if best is None or hyp.score > best[1].score:
                best = (words, hyp, traces, s)
        words, hyp, traces, chosen = best
        out.append(Prediction(clip, words, chosen.caption, sorted(chosen.names), chosen.context, hyp.score, traces))
    return out


def score_predictions(preds: Sequence[Prediction], metrics=ALL_METRICS) -> ScoreReport:
    return evaluate([p.words for p in preds], [p.reference for p in preds], [p.names for p in preds], metrics)


def run_ablation(
    cfg: ExperimentConfig,
    manifest: DatasetManifest,
    vocab: Vocabulary,
    variant: str,
    model: CaptionModel | None = None,
    split: str = "test",
    metrics=ALL_METRICS,
) -> tuple[ScoreReport, list[Prediction], TrainResult | None]:
    """Train (unless ``model`` is given) and evaluate one variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    result = None
    if model is None:
        stages = [s for s in cfg.stages if not (variant == "video_only" and s == "frozen-top")]
        result = train(cfg, manifest, vocab, stages, model=build_model(cfg, vocab, variant))
        model = result.model
    elif model.variant != variant:
        raise ValueError(f"model is a {model.variant} model, not {variant}")
    preds = generate(model, manifest, vocab, cfg.decode, split, cfg.max_context_len)
    return score_predictions(preds, metrics), preds, result
