"""Tokenization, caption/context overlap and context cropping."""

from __future__ import annotations

import logging
import re
from typing import Iterable, Sequence

from ..vocab import DATE, NUM, SPECIALS, TIME, is_punct, is_special

log = logging.getLogger(__name__)

# news-mode pattern table, tried in order
_TIME = r"\d{1,2}:\d{2}(?::\d{2})?(?:\s?[ap]\.?m\.?)?|\d{1,2}\s?[ap]\.m\.|\d{1,2}\s?[ap]m\b"
_DATE = r"\d{4}-\d{1,2}-\d{1,2}|\d{1,2}/\d{1,2}/\d{2,4}|\d{1,2}\.\d{1,2}\.\d{4}|(?:1[89]|20)\d{2}(?![\d.,]\d)"
_NUM = r"\d+(?:[.,]\d+)*(?:st|nd|rd|th)?"
_SPECIAL = "|".join(re.escape(s) for s in SPECIALS)

_WORD = re.compile(rf"{_SPECIAL}|\w+|[^\w\s]", re.UNICODE)
_NEWS = re.compile(
    rf"(?P<special>{_SPECIAL})|(?P<time>{_TIME})|(?P<date>{_DATE})|(?P<num>{_NUM})|(?P<word>\w+)|(?P<punct>[^\w\s])",
    re.UNICODE | re.IGNORECASE,
)

STOPWORDS = frozenset(
    """a an the and or but if of at by for with about to from in on up out over
    is are was were be been being am it its this that these those he she they
    them his her their him as into then than so not no there""".split()
)


def tokenize(text: str, mode: str = "default") -> list[str]:
    """Lower-case and split into words and single punctuation marks.

    In ``news`` mode times, dates and other numbers become the <time>,
    <date> and <num> tokens.
    """
    text = text.lower()
    if mode != "news":
        return _WORD.findall(text)
    out = []
    for m in _NEWS.finditer(text):
        kind = m.lastgroup
        if kind == "time":
            out.append(TIME)
        elif kind == "date":
            out.append(DATE)
        elif kind == "num":
            out.append(NUM)
        else:
            out.append(m.group())
    return out


_SENT_END = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    return [s for s in (p.strip() for p in _SENT_END.split(text)) if s]


def content_types(tokens: Iterable[str]) -> set[str]:
    return {t for t in tokens if t not in STOPWORDS and not is_special(t) and not is_punct(t)}


def compute_overlap(caption: Sequence[str], context: Sequence[str]) -> float:
    """Fraction of the caption's content-word types found in the context."""
    types = content_types(caption)
    if not types:
        return 0.0
    ctx = set(context)
    return len(types & ctx) / len(types)


def crop_context(
    sentences: Sequence[Sequence[str]],
    max_tokens: int,
    mode: str = "news",
    center: int | None = None,
) -> list[str]:
    """Drop whole sentences until at most ``max_tokens`` remain.

    ``news``: drop from the end.  ``script``: drop alternately from both
    ends, starting with the end farther from ``center`` (default: the middle
    sentence), so sentences near the centre survive.  A lone sentence that is
    still too long is truncated.
    """
    sents = [list(s) for s in sentences]
    if center is None:
        center = len(sents) // 2
    lo, hi = 0, len(sents)

    def total():
        return sum(len(s) for s in sents[lo:hi])

    if mode == "news":
        while hi - lo > 1 and total() > max_tokens:
            hi -= 1
    elif mode == "script":
        front = (center - lo) >= (hi - 1 - center)
        while hi - lo > 1 and total() > max_tokens:
            if front and lo < center:
                lo += 1
            elif not front and hi - 1 > center:
                hi -= 1
            elif lo < center:
                lo += 1
            else:
                hi -= 1
            front = not front
    else:
        raise ValueError(f"unknown crop mode {mode!r}")
    out = [t for s in sents[lo:hi] for t in s]
    if len(out) > max_tokens:
        log.warning("single sentence of %d tokens truncated to %d", len(out), max_tokens)
        out = out[:max_tokens]
    return out
