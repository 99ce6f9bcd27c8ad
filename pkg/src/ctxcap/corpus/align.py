"""Coarse scene -> video-time alignment from script dialogue and subtitles.

Three rounds:

1. exact matches of normalized dialogue lines against cue texts anchor
   scenes to cue times (kept monotone in cue order);
2. fuzzy matches (token-overlap ratio >= threshold) for the remaining lines,
   searched only between the neighbouring anchors;
3. scenes without matches that sit between two mapped scenes share the gap
   between them in proportion to their text length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .script import ScriptDocument
from .srt import SubtitleTrack
from .text import tokenize
from ..vocab import is_punct


@dataclass
class SceneInterval:
    start_ms: int
    end_ms: int
    source: str                 # "exact", "fuzzy" or "interpolated"


@dataclass
class AlignmentMap:
    intervals: list[SceneInterval | None]
    score: float
    matched_lines: int = 0
    total_lines: int = 0
    line_matches: dict[tuple[int, int], int] = field(default_factory=dict)

    def mapped(self) -> list[int]:
        return [i for i, iv in enumerate(self.intervals) if iv is not None]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "matched_lines": self.matched_lines,
            "total_lines": self.total_lines,
            "intervals": [None if iv is None else [iv.start_ms, iv.end_ms, iv.source] for iv in self.intervals],
        }


def normalize(text: str) -> tuple[str, ...]:
    return tuple(t for t in tokenize(text.replace("\n", " ")) if not is_punct(t))


def overlap_ratio(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    sa, sb = set(a), set(b)
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / max(len(sa), len(sb))


def align_script_to_time(script: ScriptDocument, subs: SubtitleTrack, fuzzy_threshold: float = 0.6) -> AlignmentMap:
    cues = subs.cues
    cue_norm = [normalize(c.text) for c in cues]
    lines = [
        (s_idx, l_idx, normalize(text))
        for s_idx, scene in enumerate(script.scenes)
        for l_idx, (_, text) in enumerate(scene.dialogues)
    ]
    total = len(lines)
    match: dict[int, int] = {}  # line position -> cue index

    # round 1: exact, monotone in cue order
    by_text: dict[tuple[str, ...], list[int]] = {}
    for ci, toks in enumerate(cue_norm):
        if toks:
            by_text.setdefault(toks, []).append(ci)
    last = -1
    for pos, (_, _, toks) in enumerate(lines):
        for ci in by_text.get(toks, ()):
            if ci > last:
                match[pos] = ci
                last = ci
                break

    # round 2: fuzzy, restricted to the gap between neighbouring anchors
    for pos, (_, _, toks) in enumerate(lines):
        if pos in match or not toks:
            continue
        lo = max((match[p] for p in match if p < pos), default=-1)
        hi = min((match[p] for p in match if p > pos), default=len(cues))
        best, best_ratio = None, fuzzy_threshold
        for ci in range(lo + 1, hi):
            r = overlap_ratio(toks, cue_norm[ci])
            if r >= best_ratio and (best is None or r > best_ratio):
                best, best_ratio = ci, r
        if best is not None:
            match[pos] = best

    intervals: list[SceneInterval | None] = [None] * len(script.scenes)
    exact_positions = {pos for pos, ci in match.items() if cue_norm[ci] == lines[pos][2]}
    for pos, ci in sorted(match.items()):
        s_idx = lines[pos][0]
        cue = cues[ci]
        kind = "exact" if pos in exact_positions else "fuzzy"
        iv = intervals[s_idx]
        if iv is None:
            intervals[s_idx] = SceneInterval(cue.start_ms, cue.end_ms, kind)
        else:
            iv.start_ms = min(iv.start_ms, cue.start_ms)
            iv.end_ms = max(iv.end_ms, cue.end_ms)
            if kind == "fuzzy":
                iv.source = "fuzzy"

    # round 3: interpolate runs of unmapped scenes between mapped neighbours
    mapped = [i for i, iv in enumerate(intervals) if iv is not None]
    for left, right in zip(mapped, mapped[1:]):
        gap = list(range(left + 1, right))
        if not gap:
            continue
        t0, t1 = intervals[left].end_ms, intervals[right].start_ms
        if t1 < t0:
            t0 = t1 = intervals[left].end_ms
        weights = [max(1, len(script.scenes[i].text().split())) for i in gap]
        acc = 0
        total_w = sum(weights)
        for i, w in zip(gap, weights):
            a = t0 + (t1 - t0) * acc // total_w
            acc += w
            b = t0 + (t1 - t0) * acc // total_w
            intervals[i] = SceneInterval(a, b, "interpolated")

    line_matches = {(lines[p][0], lines[p][1]): ci for p, ci in match.items()}
    score = len(match) / total if total else 0.0
    return AlignmentMap(intervals, score, len(match), total, line_matches)


def scenes_for_interval(amap: AlignmentMap, start_ms: int, end_ms: int) -> list[int]:
    """Indices of mapped scenes overlapping [start_ms, end_ms]; if none
    overlap, the nearest mapped scene."""
    hits = [
        i for i, iv in enumerate(amap.intervals)
        if iv is not None and iv.start_ms <= end_ms and iv.end_ms >= start_ms
    ]
    if hits:
        return hits
    mapped = amap.mapped()
    if not mapped:
        return []
    mid = (start_ms + end_ms) / 2

    def dist(i):
        iv = amap.intervals[i]
        return 0 if iv.start_ms <= mid <= iv.end_ms else min(abs(iv.start_ms - mid), abs(iv.end_ms - mid))

    return [min(mapped, key=dist)]
