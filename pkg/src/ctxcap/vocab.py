"""Global vocabulary and per-sample extended vocabulary."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK, NUM, DATE, TIME = "<pad>", "<bos>", "<eos>", "<unk>", "<num>", "<date>", "<time>"
SPECIALS = (PAD, BOS, EOS, UNK, NUM, DATE, TIME)
PUNCTUATION = frozenset(".,!?;:'\"()-[]…/")


def is_special(token: str) -> bool:
    return token in SPECIALS


def is_punct(token: str) -> bool:
    return bool(token) and all(not ch.isalnum() for ch in token) and not is_special(token)


class Vocabulary:
    """Token <-> index map.  Special tokens occupy the lowest indices."""

    def __init__(self, tokens: Sequence[str], freqs: dict[str, int] | None = None):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.itos = tokens
        self.stoi = {t: i for i, t in enumerate(tokens)}
        self.freqs = dict(freqs or {})

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos and self.freqs == other.freqs

    @property
    def pad(self) -> int:
        return self.stoi[PAD]

    @property
    def bos(self) -> int:
        return self.stoi[BOS]

    @property
    def eos(self) -> int:
        return self.stoi[EOS]

    @property
    def unk(self) -> int:
        return self.stoi[UNK]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        unk = self.unk
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_json(self) -> str:
        return json.dumps({"tokens": self.itos, "freqs": self.freqs}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        d = json.loads(text)
        return cls(d["tokens"], d.get("freqs"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_vocab(corpus: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """Keep the ``max_size - len(SPECIALS)`` most frequent tokens.

    Ties in frequency are broken lexicographically so the result depends
    only on the corpus contents.
    """
    counts = Counter()
    for tokens in corpus:
        counts.update(t for t in tokens if t not in SPECIALS)
    room = max(0, max_size - len(SPECIALS))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:room]
    return Vocabulary(list(SPECIALS) + [t for t, _ in ranked], {t: c for t, c in ranked})


@dataclass
class ExtendedVocab:
    """Global vocabulary plus the context words it lacks.

    Out-of-vocabulary context words get ids ``len(global) + k`` in order of
    first occurrence; repeated occurrences share one id.
    """

    vocab: Vocabulary
    oov: list[str] = field(default_factory=list)

    @classmethod
    def from_context(cls, vocab: Vocabulary, context: Sequence[str]) -> "ExtendedVocab":
        seen: dict[str, None] = {}
        for tok in context:
            if tok not in vocab and tok not in seen:
                seen[tok] = None
        return cls(vocab, list(seen))

    def __len__(self) -> int:
        return len(self.vocab) + len(self.oov)

    def id_of(self, token: str) -> int:
        i = self.vocab.stoi.get(token)
        if i is not None:
            return i
        try:
            return len(self.vocab) + self.oov.index(token)
        except ValueError:
            return self.vocab.unk

    def encode(self, tokens: Iterable[str]) -> list[int]:
        lookup = {t: len(self.vocab) + k for k, t in enumerate(self.oov)}
        out = []
        for t in tokens:
            i = self.vocab.stoi.get(t)
            if i is None:
                i = lookup.get(t, self.vocab.unk)
            out.append(i)
        return out

    def word(self, idx: int) -> str:
        V = len(self.vocab)
        if 0 <= idx < V:
            return self.vocab.itos[idx]
        if V <= idx < V + len(self.oov):
            return self.oov[idx - V]
        raise IndexError(f"id {idx} outside extended vocabulary of size {len(self)}")

    def resolve(self, ids: Iterable[int]) -> list[str]:
        return [self.word(i) for i in ids]
