"""Caption evaluation metrics on pre-tokenized, lower-cased captions.

ROUGE-L, CIDEr (TF-IDF n-gram cosine with a length penalty), a METEOR
variant restricted to exact and stem matches, name recovery, and a
repetition diagnostic.  All per-sample scores lie in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import snowballstemmer

from .vocab import is_punct, is_special

_STEMMER = snowballstemmer.stemmer("porter")


def stem(word: str) -> str:
    return _STEMMER.stemWord(word)


# -- ROUGE-L ------------------------------------------------------------------

def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str], beta: float = 1.2) -> float:
    if not reference:
        raise ValueError("rouge_l needs a non-empty reference")
    if not candidate:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


# -- CIDEr --------------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class CiderResult:
    score: float
    per_sample: list[float]


def cider(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str] | Sequence[Sequence[str]]],
    n: int = 4,
    sigma: float = 6.0,
) -> CiderResult:
    """CIDEr-D style score scaled to [0, 1].

    Term weights are raw n-gram counts times log(N / df) with document
    frequencies taken over the references; the per-n similarity is the
    clipped cosine min(c, r) . r / (|c| |r|) times exp(-(len_c - len_r)^2 /
    (2 sigma^2)).  The conventional x10 scale is left to presentation code.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if len(candidates) < 2:
        raise ValueError("cider needs a corpus of at least two samples")
    refs = [[list(r)] if r and isinstance(r[0], str) else [list(x) for x in r] for r in references]
    N = len(refs)
    df: list[Counter] = [Counter() for _ in range(n)]
    for rs in refs:
        for k in range(n):
            seen = set()
            for r in rs:
                seen.update(_ngrams(r, k + 1))
            df[k].update(seen)
    log_n = math.log(float(N))

    def vec(tokens):
        out = []
        for k in range(n):
            counts = _ngrams(tokens, k + 1)
            out.append({g: c * (log_n - math.log(max(1.0, df[k][g]))) for g, c in counts.items()})
        return out

    def norm(v):
        return math.sqrt(sum(x * x for x in v.values()))

    per_sample = []
    for cand, rs in zip(candidates, refs):
        vc = vec(list(cand))
        sample_scores = []
        for r in rs:
            vr = vec(r)
            delta = len(cand) - len(r)
            total = 0.0
            for k in range(n):
                nc, nr = norm(vc[k]), norm(vr[k])
                if nc == 0.0 or nr == 0.0:
                    continue
                dot = sum(min(vc[k][g], vr[k][g]) * vr[k][g] for g in vc[k] if g in vr[k])
                total += dot / (nc * nr) * math.exp(-(delta**2) / (2 * sigma**2))
            sample_scores.append(total / n)
        per_sample.append(sum(sample_scores) / len(sample_scores))
    return CiderResult(sum(per_sample) / N, per_sample)


# -- METEOR (exact + stem) ----------------------------------------------------

@dataclass
class MeteorDetail:
    score: float
    precision: float
    recall: float
    f_mean: float
    penalty: float
    matches: int
    chunks: int
    alignment: list[tuple[int, int]] = field(default_factory=list)


def _align(candidate, reference, use_stem: bool) -> list[tuple[int, int]]:
    """Exact-match stage then stem stage; within a stage each candidate word
    takes the unmatched reference position that extends the current chunk
    when possible, else the leftmost one."""
    cand_used: dict[int, int] = {}
    ref_used: set[int] = set()
    stages = [lambda w: w]
    if use_stem:
        stages.append(stem)
    for key in stages:
        ref_keys = [key(w) for w in reference]
        last_ref = None
        for i, w in enumerate(candidate):
            if i in cand_used:
                last_ref = cand_used[i]
                continue
            k = key(w)
            options = [j for j, rk in enumerate(ref_keys) if rk == k and j not in ref_used]
            if not options:
                last_ref = None
                continue
            j = last_ref + 1 if last_ref is not None and last_ref + 1 in options else options[0]
            cand_used[i] = j
            ref_used.add(j)
            last_ref = j
    return sorted(cand_used.items())


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in sorted(alignment):
        if prev is None or not (i == prev[0] + 1 and j == prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(
    candidate: Sequence[str],
    reference: Sequence[str],
    alpha: float = 0.9,
    gamma: float = 0.5,
    use_stem: bool = True,
    detail: bool = False,
):
    """F_mean = P R / (alpha P + (1 - alpha) R); penalty = gamma (chunks /
    matches)^3; score = F_mean (1 - penalty)."""
    if not reference:
        raise ValueError("meteor_lite needs a non-empty reference")
    alignment = _align(list(candidate), list(reference), use_stem) if candidate else []
    m = len(alignment)
    if m == 0:
        res = MeteorDetail(0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, [])
        return res if detail else 0.0
    p = m / len(candidate)
    r = m / len(reference)
    f_mean = p * r / (alpha * p + (1 - alpha) * r)
    chunks = count_chunks(alignment)
    penalty = gamma * (chunks / m) ** 3
    res = MeteorDetail(f_mean * (1 - penalty), p, r, f_mean, penalty, m, chunks, alignment)
    return res if detail else res.score


# -- name recovery and repetition ---------------------------------------------

def name_recovery(
    predictions: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    name_sets: Sequence[Iterable[str]],
) -> float | None:
    """Fraction of name tokens in the references that also occur in the
    matching prediction.  None when the references contain no names."""
    total = 0
    hit = 0
    for pred, ref, names in zip(predictions, references, name_sets):
        names = set(names)
        pred_set = set(pred)
        for tok in ref:
            if tok in names:
                total += 1
                hit += tok in pred_set
    if total == 0:
        return None
    return hit / total


def repetition_rate(tokens: Sequence[str]) -> float:
    """1 - distinct / total over non-special, non-punctuation tokens."""
    content = [t for t in tokens if not is_special(t) and not is_punct(t)]
    if not content:
        return 0.0
    return 1.0 - len(set(content)) / len(content)


# -- reports ------------------------------------------------------------------

ALL_METRICS = ("rouge", "cider", "meteor", "names", "rep")


@dataclass
class ScoreReport:
    corpus: dict[str, float | None]
    per_sample: dict[str, list[float]]
    count: int

    def to_dict(self) -> dict:
        return {"count": self.count, "corpus": self.corpus, "per_sample": self.per_sample}

    def percent(self) -> dict[str, float | None]:
        return {k: (None if v is None else 100.0 * v) for k, v in self.corpus.items()}


def evaluate(
    predictions: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    name_sets: Sequence[Iterable[str]] | None = None,
    metrics: Iterable[str] = ALL_METRICS,
) -> ScoreReport:
    metrics = list(metrics)
    unknown = set(metrics) - set(ALL_METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    corpus: dict[str, float | None] = {}
    per: dict[str, list[float]] = defaultdict(list)
    if "rouge" in metrics:
        per["rouge"] = [rouge_l(p, r) for p, r in zip(predictions, references)]
        corpus["rouge"] = sum(per["rouge"]) / len(per["rouge"])
    if "meteor" in metrics:
        per["meteor"] = [meteor_lite(p, r) for p, r in zip(predictions, references)]
        corpus["meteor"] = sum(per["meteor"]) / len(per["meteor"])
    if "cider" in metrics:
        res = cider(predictions, references)
        per["cider"] = res.per_sample
        corpus["cider"] = res.score
    if "names" in metrics:
        corpus["names"] = name_recovery(predictions, references, name_sets or [set()] * len(predictions))
    if "rep" in metrics:
        per["rep"] = [repetition_rate(p) for p in predictions]
        corpus["rep"] = sum(per["rep"]) / len(per["rep"])
    return ScoreReport(corpus, dict(per), len(predictions))
