"""Synthetic copy task standing in for video + contextual text corpora.

Each clip shows one of a few templates; its frame features are a noisy
one-hot pattern of the template id, so vision alone determines the verb.
The context is a shuffled mix of distractor sentences and one carrier
sentence naming a person and a place.  Names and places come from pools
that are disjoint from the global vocabulary, so only copying can produce
them.

``task="list"`` instead asks the model to reproduce a long list of names
from the context in order; it exercises the coverage mechanism.  The
test split may use longer lists than training and validation
(``eval_list_min``/``eval_list_max``), which is where a decoder that does
not track what it has already copied starts to repeat itself.  Validation
keeps the training lengths so that early stopping selects on the
distribution the model is fitted to.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus.manifest import DatasetManifest, ManifestRecord, write_features
from .vocab import SPECIALS, Vocabulary

VERBS = ("walks", "runs", "sits", "waits", "dances", "sleeps", "eats", "reads", "sings", "cries", "smiles", "jumps")
FRAME_WORDS = ("is", "in", "the", ".", "someone", "somewhere", "and", "with", "a", ",")
FILLER = (
    "old new red blue big small car house door window street tree dog cat table chair man woman "
    "stops opens closes looks near far under over behind across quickly slowly rain sun night day "
    "city road river hill bridge train phone letter light dark cold warm green white black long short"
).split()
SYLLABLES = ("ka", "lo", "mi", "ra", "ne", "so", "tu", "vi", "da", "pe", "zo", "ri", "ba", "xu", "fe", "go")


class SpecError(ValueError):
    pass


@dataclass
class SyntheticTaskSpec:
    vocab_size: int = 50
    name_pool: int = 200
    location_pool: int = 40
    templates: int = 8
    frames: int = 4
    feature_dim: int = 16
    feature_noise: float = 0.3
    noise_sentences: int = 3
    train: int = 2000
    val: int = 200
    test: int = 200
    pretrain: int = 0
    contexts_per_clip: int = 1
    task: str = "caption"
    list_min: int = 6
    list_max: int = 10
    eval_list_min: int | None = None
    eval_list_max: int | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _pool(rng: np.random.Generator, size: int, taken: set[str], suffix: str) -> list[str]:
    out: list[str] = []
    seen = set(taken)
    while len(out) < size:
        word = "".join(rng.choice(SYLLABLES, size=3)) + suffix
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


def task_vocabulary(spec: SyntheticTaskSpec) -> Vocabulary:
    """Specials, frame words, template verbs, then filler words up to size."""
    fixed = list(SPECIALS) + list(FRAME_WORDS) + list(VERBS[: spec.templates])
    if spec.templates > len(VERBS):
        raise SpecError(f"at most {len(VERBS)} templates are available")
    room = spec.vocab_size - len(fixed)
    if room < 5:
        raise SpecError(
            f"vocab_size {spec.vocab_size} too small: the grammar needs {len(fixed)} words plus 5 fillers"
        )
    if room > len(FILLER):
        raise SpecError(f"vocab_size {spec.vocab_size} exceeds the {len(fixed) + len(FILLER)} available words")
    return Vocabulary(fixed + FILLER[:room])


def _features(rng, spec: SyntheticTaskSpec, template: int) -> np.ndarray:
    feats = rng.normal(0.0, spec.feature_noise, size=(spec.frames, spec.feature_dim))
    for f in range(spec.frames):
        feats[f, (template + f * spec.templates) % spec.feature_dim] += 1.0
    return feats.astype(np.float32)


def _distractor(rng, fillers: list[str]) -> list[str]:
    n = int(rng.integers(4, 8))
    return [str(w) for w in rng.choice(fillers, size=n)] + ["."]


def generate_synthetic_dataset(spec: SyntheticTaskSpec, out_dir) -> tuple[DatasetManifest, Vocabulary]:
    """Write features/, manifest.jsonl, vocab.json and spec.json to ``out_dir``."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    vocab = task_vocabulary(spec)
    rng = np.random.default_rng(spec.seed)
    global_words = set(vocab.itos)
    names = _pool(rng, spec.name_pool, global_words, "n")
    places = _pool(rng, spec.location_pool, global_words | set(names), "ton")
    leaked = (set(names) | set(places)) & global_words
    if leaked:
        raise SpecError(f"filler words leak into the global vocabulary: {sorted(leaked)}")
    fillers = [w for w in vocab.itos if w in FILLER]
    verbs = list(VERBS[: spec.templates])

    records = []
    counts = [("pretrain", spec.pretrain), ("train", spec.train), ("val", spec.val), ("test", spec.test)]
    k = 0
    for split, n in counts:
        for _ in range(n):
            clip = f"clip{k:05d}"
            template = int(rng.integers(spec.templates))
            feats = _features(rng, spec, template)
            fpath = Path("features") / f"{clip}.ctxf"
            write_features(out / fpath, feats)
            if spec.task == "list":
                lo, hi = spec.list_min, spec.list_max
                if split == "test":
                    lo = spec.eval_list_min or lo
                    hi = spec.eval_list_max or hi
                count = int(rng.integers(lo, hi + 1))
                who = [str(x) for x in rng.choice(names, size=count, replace=False)]
                carrier = ["with", "a"] + [t for w in who for t in (w, ",")][:-1] + ["."]
                caption = list(who) + ["."]
                anon = ["someone", "."]
                clip_names = who
            else:
                who = str(rng.choice(names))
                where = str(rng.choice(places))
                carrier = [who, "is", "in", "the", where, "."]
                caption = [who, verbs[template], "in", "the", where, "."]
                anon = ["someone", verbs[template], "in", "the", "somewhere", "."]
                clip_names = [who]
            for c in range(spec.contexts_per_clip):
                sentences = [_distractor(rng, fillers) for _ in range(spec.noise_sentences)]
                if c == 0:
                    sentences.insert(int(rng.integers(len(sentences) + 1)), carrier)
                context = [t for s in sentences for t in s]
                if not context:
                    context = list(carrier)
                records.append(ManifestRecord(
                    clip_id=clip,
                    movie_id="synthetic",
                    features=str(fpath),
                    context_source=f"synthetic:{c}",
                    context=context,
                    caption=anon if split == "pretrain" else caption,
                    split=split,
                    names=sorted(clip_names),
                ))
            k += 1
    manifest = DatasetManifest(records, out)
    manifest.save(out / "manifest.jsonl")
    vocab.save(out / "vocab.json")
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    return manifest, vocab
