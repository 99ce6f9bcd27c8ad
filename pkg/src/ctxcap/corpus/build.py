"""Corpus construction: captions + scripts/articles + subtitles -> manifest.

Input clip list (``--captions``) is JSON lines with fields::

    clip_id, movie_id, caption, features          (all modes)
    start_ms, end_ms                              (ad / script modes)
    article_ids: [..]                             (news mode)

Scripts live in ``<scripts_dir>/<movie_id>.txt`` and subtitles in
``<subs_dir>/<movie_id>.srt``; in news mode ``<scripts_dir>/<article_id>.txt``
holds article text.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .align import align_script_to_time, scenes_for_interval
from .manifest import DataError, DatasetManifest, ManifestRecord, filter_movies, split_by_movie
from .script import ScriptParseError, parse_script
from .srt import SubtitleError, parse_srt
from .text import crop_context, split_sentences, tokenize

log = logging.getLogger(__name__)

MAX_CONTEXT = {"ad": 400, "script": 600, "news": 400}


@dataclass
class BuildReport:
    overlaps: dict[str, float]
    alignment_scores: dict[str, float]
    dropped_movies: list[str]
    kept_records: int

    def to_dict(self) -> dict:
        return self.__dict__


def _read_clips(path) -> list[dict]:
    clips = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    clips.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{n}: {exc}") from None
    return clips


def _scene_context(doc, amap, clip, max_tokens):
    idx = scenes_for_interval(amap, int(clip["start_ms"]), int(clip["end_ms"]))
    if not idx:
        return None, ""
    sentences = []
    centre_sentence = None
    mid = (int(clip["start_ms"]) + int(clip["end_ms"])) / 2
    for i in idx:
        iv = amap.intervals[i]
        sents = [tokenize(s) for s in split_sentences(doc.scenes[i].text())]
        if centre_sentence is None and iv.start_ms <= mid <= iv.end_ms and sents:
            frac = (mid - iv.start_ms) / max(1, iv.end_ms - iv.start_ms)
            centre_sentence = len(sentences) + min(len(sents) - 1, int(frac * len(sents)))
        sentences.extend(sents)
    if not sentences:
        return None, ""
    context = crop_context(sentences, max_tokens, "script", centre_sentence)
    return context, f"scenes:{idx[0]}-{idx[-1]}"


def build_corpus(
    captions: str | Path,
    scripts_dir: str | Path,
    out_manifest: str | Path,
    subs_dir: str | Path | None = None,
    mode: str = "ad",
    overlap_threshold: float = 1.0 / 3.0,
    min_alignment: float = 0.1,
    max_context: int | None = None,
    seed: int = 0,
) -> tuple[DatasetManifest, BuildReport]:
    if mode not in MAX_CONTEXT:
        raise ValueError(f"unknown mode {mode!r}")
    max_tokens = max_context or MAX_CONTEXT[mode]
    scripts_dir = Path(scripts_dir)
    clips = _read_clips(captions)
    tok_mode = "news" if mode == "news" else "default"
    records: list[ManifestRecord] = []
    align_scores: dict[str, float] = {}
    dropped: list[str] = []

    if mode == "news":
        for clip in clips:
            for aid in clip.get("article_ids", []):
                path = scripts_dir / f"{aid}.txt"
                if not path.exists():
                    log.warning("article %s missing", aid)
                    continue
                sents = [tokenize(s, tok_mode) for s in split_sentences(path.read_text(encoding="utf-8"))]
                records.append(ManifestRecord(
                    clip_id=clip["clip_id"],
                    movie_id=clip.get("movie_id", clip["clip_id"]),
                    features=clip["features"],
                    context_source=f"article:{aid}",
                    context=crop_context(sents, max_tokens, "news"),
                    caption=tokenize(clip["caption"], tok_mode),
                    names=list(clip.get("names", [])),
                ))
    else:
        if subs_dir is None:
            raise ValueError("subtitle directory required for ad/script modes")
        by_movie: dict[str, list[dict]] = {}
        for clip in clips:
            by_movie.setdefault(clip["movie_id"], []).append(clip)
        for movie in sorted(by_movie):
            try:
                doc = parse_script((scripts_dir / f"{movie}.txt").read_text(encoding="utf-8", errors="replace"))
                subs = parse_srt((Path(subs_dir) / f"{movie}.srt").read_text(encoding="utf-8", errors="replace"))
            except FileNotFoundError as exc:
                log.warning("movie %s skipped: %s", movie, exc)
                dropped.append(movie)
                continue
            except (ScriptParseError, SubtitleError) as exc:
                log.warning("movie %s skipped: %s", movie, exc)
                dropped.append(movie)
                continue
            amap = align_script_to_time(doc, subs)
            align_scores[movie] = amap.score
            if amap.score < min_alignment or not amap.mapped():
                dropped.append(movie)
                continue
            names = sorted(doc.character_names())
            for clip in by_movie[movie]:
                context, source = _scene_context(doc, amap, clip, max_tokens)
                if context is None:
                    continue
                records.append(ManifestRecord(
                    clip_id=clip["clip_id"],
                    movie_id=movie,
                    features=clip["features"],
                    context_source=source,
                    context=context,
                    caption=tokenize(clip["caption"], tok_mode),
                    names=names,
                ))

    manifest = DatasetManifest(records, Path(out_manifest).parent)
    manifest, overlaps = filter_movies(manifest, overlap_threshold)
    dropped.extend(m for m, v in overlaps.items() if v < overlap_threshold)
    splits = split_by_movie(manifest.movies(), seed)
    for r in manifest.records:
        r.split = splits[r.movie_id]
    manifest.save(out_manifest)
    return manifest, BuildReport(overlaps, align_scores, sorted(set(dropped)), len(manifest.records))
