"""Experiment configuration and presets (JSON on disk)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .decoding import DecodeConfig
from .s2vt import S2VTConfig

STAGES = ("pretrain-s2vt", "frozen-top", "end-to-end")


@dataclass
class ExperimentConfig:
    s2vt: S2VTConfig = field(default_factory=S2VTConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    vocab_size: int = 20000
    max_context_len: int = 400
    context_hidden: int = 256
    coverage_weight: float = 1.0
    dropout: float = 0.5
    learning_rate: float = 1e-4
    batch_size: int = 16
    grad_clip: float | None = 5.0
    epochs: dict[str, int] = field(default_factory=lambda: {s: 20 for s in STAGES})
    patience: int = 5
    stages: list[str] = field(default_factory=lambda: ["end-to-end"])
    variant: str = "full"
    freeze_top_lstm: bool = False
    load_checkpoint: str | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.s2vt, dict):
            self.s2vt = S2VTConfig(**self.s2vt)
        if isinstance(self.decode, dict):
            self.decode = DecodeConfig(**self.decode)
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}; expected a subset of {STAGES}")
        if self.decode.max_len != self.s2vt.T_dec:
            self.decode.max_len = self.s2vt.T_dec

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def preset(name: str, **overrides) -> ExperimentConfig:
    """Named configurations.

    ``news``            120-step timeline (60 + 60), context 400, lambda 0.2,
                        beam 2, beta 0.2
    ``lsmdc-ad``        40-step timeline (10 + 30), context 400, lambda 1.0,
                        greedy, beta 0.2
    ``lsmdc-script``    as lsmdc-ad with context 600
    ``synthetic``       desk-scale dimensions for the synthetic copy task
    ``synthetic-list``  synthetic long-output task, 30 decode steps
    """
    if name == "news":
        cfg = ExperimentConfig(
            s2vt=S2VTConfig(T_enc=60, T_dec=60, video_feature_dim=4096),
            decode=DecodeConfig(beam_width=2, repetition_beta=0.2, max_len=60),
            max_context_len=400,
            coverage_weight=0.2,
        )
    elif name in ("lsmdc-ad", "lsmdc-script"):
        cfg = ExperimentConfig(
            s2vt=S2VTConfig(T_enc=10, T_dec=30, video_feature_dim=2048 + 1024),
            decode=DecodeConfig(beam_width=1, repetition_beta=0.2, max_len=30),
            max_context_len=400 if name == "lsmdc-ad" else 600,
            coverage_weight=1.0,
            stages=["pretrain-s2vt", "frozen-top", "end-to-end"],
        )
    elif name in ("synthetic", "synthetic-list"):
        long = name == "synthetic-list"
        cfg = ExperimentConfig(
            s2vt=S2VTConfig(
                T_enc=4,
                T_dec=30 if long else 8,
                video_feature_dim=16,
                video_embed_dim=16,
                word_embed_dim=16,
                hidden_dim=32,
            ),
            decode=DecodeConfig(beam_width=1, repetition_beta=0.2, max_len=30 if long else 8),
            max_context_len=64,
            context_hidden=16,
            coverage_weight=1.0,
            dropout=0.0,
            learning_rate=5e-3,
            batch_size=16,
            epochs={"pretrain-s2vt": 4, "frozen-top": 4, "end-to-end": 6 if long else 12},
            patience=5,
        )
    else:
        raise ValueError(f"unknown preset {name!r}")
    for k, v in overrides.items():
        if not hasattr(cfg, k):
            raise ValueError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    cfg.__post_init__()
    return cfg
