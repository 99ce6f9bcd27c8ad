"""Whole-model gradient check on a tiny random instance in float64."""

from __future__ import annotations

import numpy as np

from .data import Sample, make_batch
from .gradcheck import grad_check
from .model import VARIANTS, CaptionModel, ModelConfig
from .s2vt import S2VTConfig
from .vocab import Vocabulary


def tiny_instance(dim: int = 8, batch: int = 2, caption_len: int = 2, context_len: int = 5, seed: int = 0, variant: str = "full"):
    """A float64 model with every size at most ``dim`` plus one batch.

    Parameters are redrawn from N(0, 0.5): at the default initialisation
    many gradients are ~1e-10, where finite-difference noise dominates the
    relative error.
    """
    rng = np.random.default_rng(seed)
    vocab = Vocabulary([f"w{i}" for i in range(dim)])
    half = max(1, dim // 2)
    cfg = ModelConfig(
        S2VTConfig(T_enc=3, T_dec=caption_len + 1, video_feature_dim=dim, video_embed_dim=half + 1,
                   word_embed_dim=half + 1, hidden_dim=max(2, dim - dim % 2)),
        vocab_size=len(vocab),
        context_hidden=half,
        dropout=0.0,
        coverage_weight=1.0,
        variant=variant,
    )
    model = CaptionModel(cfg, seed=seed, dtype=np.float64)
    for _, p in model.params.items():
        p.data = rng.normal(0.0, 0.5, size=p.shape)
    words = vocab.itos[7:]
    samples = []
    for i in range(batch):
        ctx = [str(rng.choice(words)) for _ in range(context_len - 1)] + [f"name{i}"]
        cap = [str(rng.choice(words)) for _ in range(caption_len - 1)] + [f"name{i}"]
        samples.append(Sample(f"s{i}", rng.normal(size=(3, dim)), ctx, cap))
    b = make_batch(samples, vocab, caption_len + 1, dtype=np.float64,
                   use_context=variant != "video_only", zero_video=variant == "context_only")
    return model, b


def model_grad_check(
    dim: int = 8, seed: int = 0, max_coords: int = 6, variants=VARIANTS, h: float = 1e-4
) -> dict[str, float]:
    """Max relative error per parameter (keyed ``variant/name``).

    The default step is 1e-4 rather than 1e-5: some attention gradients are
    ~1e-7 here, and at h=1e-5 the float64 round-off in the loss difference
    alone reaches 1e-4 relative error.  Truncation error at h=1e-4 stays
    below 1e-6 relative on this instance.
    """
    out = {}
    for v in variants:
        model, batch = tiny_instance(dim, seed=seed, variant=v)
        for name in model.parameter_names():
            out[f"{v}/{name}"] = grad_check(lambda: model.loss(batch), model.params, h=h, max_coords=max_coords, seed=seed, names=[name])
    return out
