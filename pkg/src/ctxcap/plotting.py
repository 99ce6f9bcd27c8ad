"""Report figures rendered to files (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_loss_curve(curve: Sequence[dict], path) -> Path:
    """Train and validation loss per epoch, stages laid end to end."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(len(curve))
    ax.plot(x, [r["train_loss"] for r in curve], marker="o", label="train")
    val = [r["val_loss"] for r in curve]
    if any(v is not None for v in val):
        ax.plot(x, [np.nan if v is None else v for v in val], marker="s", label="val")
    stage_starts = [i for i, r in enumerate(curve) if i == 0 or r["stage"] != curve[i - 1]["stage"]]
    for i in stage_starts:
        ax.axvline(i - 0.5, color="grey", lw=0.8, ls=":")
        ax.text(i - 0.4, ax.get_ylim()[1], curve[i]["stage"], va="top", fontsize=7)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_trace(context: Sequence[str], words: Sequence[str], trace: Sequence[dict], path) -> Path:
    """Context tokens shaded by final coverage above a bar of p_gen per
    emitted token."""
    per_row = 14
    rows = max(1, -(-len(context) // per_row))
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(9, 2.5 + 0.28 * rows), gridspec_kw={"height_ratios": [0.28 * rows + 0.3, 2.0]}
    )
    top.axis("off")
    cov = np.asarray(trace[-1]["coverage"][: len(context)]) if trace else np.zeros(len(context))
    peak = max(1.0, float(cov.max())) if cov.size else 1.0
    for i, tok in enumerate(context):
        r, c = divmod(i, per_row)
        shade = float(cov[i]) / peak if i < cov.size else 0.0
        top.text(
            c / per_row, 1 - (r + 0.5) / rows, tok, fontsize=7, va="center",
            bbox={"facecolor": plt.cm.Oranges(shade), "edgecolor": "none", "pad": 1.5},
        )
    top.set_title("context shaded by final coverage", fontsize=9)
    p_gen = [t["p_gen"] for t in trace]
    bottom.bar(np.arange(len(p_gen)), p_gen, color="steelblue")
    bottom.set_xticks(np.arange(len(p_gen)))
    labels = list(words) + ["<eos>"] * (len(p_gen) - len(words))
    bottom.set_xticklabels(labels[: len(p_gen)], rotation=60, fontsize=7)
    bottom.set_ylim(0, 1)
    bottom.set_ylabel("p_gen")
    fig.tight_layout()
    return _save(fig, path)


def plot_scores(scores: dict[str, dict[str, float | None]], path) -> Path:
    """Grouped bars: one group per metric, one bar per system."""
    systems = list(scores)
    metrics = sorted({m for s in scores.values() for m in s})
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(1, len(systems))
    for k, name in enumerate(systems):
        vals = [scores[name].get(m) or 0.0 for m in metrics]
        ax.bar(np.arange(len(metrics)) + k * width, vals, width, label=name)
    ax.set_xticks(np.arange(len(metrics)) + width * (len(systems) - 1) / 2)
    ax.set_xticklabels(metrics)
    ax.set_ylabel("score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
