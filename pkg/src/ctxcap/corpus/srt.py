"""SubRip (.srt) subtitle parsing and serialization."""

from __future__ import annotations

import re
from dataclasses import dataclass


class SubtitleError(ValueError):
    pass


@dataclass(frozen=True)
class Cue:
    index: int
    start_ms: int
    end_ms: int
    text: str


@dataclass
class SubtitleTrack:
    cues: list[Cue]

    @property
    def start_ms(self) -> int:
        return self.cues[0].start_ms if self.cues else 0

    @property
    def end_ms(self) -> int:
        return max((c.end_ms for c in self.cues), default=0)


_TIMING = re.compile(
    r"^\s*(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})\s*-->\s*(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})"
)
_TAGS = re.compile(r"<[^>]*>|\{\\[^}]*\}")


def _ms(h, m, s, frac) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(frac.ljust(3, "0"))


def format_time(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{milli:03d}"


def clean_text(line: str) -> str:
    return " ".join(_TAGS.sub("", line).split())


def parse_srt(text: str) -> SubtitleTrack:
    """Parse SRT text into cues sorted by start time.

    Markup tags are stripped and whitespace inside each text line collapsed;
    multi-line cue text keeps its line breaks.  Raises SubtitleError with the
    1-based line number of a malformed timing line.
    """
    lines = text.lstrip("﻿").splitlines()
    cues = []
    i = 0
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        block_start = i
        index_line = lines[i].strip()
        i += 1
        if not index_line.isdigit():
            raise SubtitleError(f"line {block_start + 1}: expected a cue number, got {index_line!r}")
        if i >= n:
            raise SubtitleError(f"line {i + 1}: missing timing line")
        m = _TIMING.match(lines[i])
        if not m:
            raise SubtitleError(f"line {i + 1}: malformed timestamp {lines[i].strip()!r}")
        start, end = _ms(*m.groups()[:4]), _ms(*m.groups()[4:])
        if end <= start:
            raise SubtitleError(f"line {i + 1}: cue ends before it starts")
        i += 1
        text_lines = []
        while i < n and lines[i].strip():
            cleaned = clean_text(lines[i])
            if cleaned:
                text_lines.append(cleaned)
            i += 1
        cues.append(Cue(int(index_line), start, end, "\n".join(text_lines)))
    cues.sort(key=lambda c: (c.start_ms, c.end_ms, c.index))
    return SubtitleTrack(cues)


def serialize_srt(track: SubtitleTrack) -> str:
    blocks = []
    for c in track.cues:
        blocks.append(f"{c.index}\n{format_time(c.start_ms)} --> {format_time(c.end_ms)}\n{c.text}\n")
    return "\n".join(blocks)
