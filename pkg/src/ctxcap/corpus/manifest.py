"""Dataset manifests (JSON lines) and binary frame-feature files.

Feature file layout, little-endian::

    magic    4 bytes  b"CTXF"
    version  uint8    1
    rank     uint8    number of dimensions (2 for frames x features)
    pad      2 bytes  zero
    dims     rank x uint32
    payload  float32 values in C order
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..data import Sample
from .text import compute_overlap

FEATURE_MAGIC = b"CTXF"
SPLITS = ("train", "val", "test")


class DataError(ValueError):
    pass


def write_features(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<BB2x", 1, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_features(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != FEATURE_MAGIC:
        raise DataError(f"{path}: bad feature-file magic")
    version, rank = struct.unpack_from("<BB", data, 4)
    if version != 1:
        raise DataError(f"{path}: unsupported feature-file version {version}")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    offset = 8 + 4 * rank
    count = int(np.prod(dims)) if dims else 1
    payload = data[offset:]
    if len(payload) != 4 * count:
        raise DataError(f"{path}: payload has {len(payload)} bytes, expected {4 * count}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)


@dataclass
class ManifestRecord:
    clip_id: str
    movie_id: str
    features: str
    context_source: str
    context: list[str]
    caption: list[str]
    split: str = "train"
    names: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        return cls(**json.loads(line))


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    root: Path = Path(".")

    def __len__(self) -> int:
        return len(self.records)

    def split(self, name: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == name]

    def movies(self) -> list[str]:
        return sorted({r.movie_id for r in self.records})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(r.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise DataError(f"manifest {path} does not exist")
        records = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(ManifestRecord.from_json(line))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise DataError(f"{path}:{n}: bad manifest record ({exc})") from None
        return cls(records, path.parent)

    def feature_path(self, record: ManifestRecord) -> Path:
        p = Path(record.features)
        return p if p.is_absolute() else self.root / p

    def sample(self, record: ManifestRecord) -> Sample:
        return Sample(
            clip_id=record.clip_id,
            features=read_features(self.feature_path(record)),
            context=list(record.context),
            caption=list(record.caption),
            names=frozenset(record.names),
            movie_id=record.movie_id,
            split=record.split,
        )

    def samples(self, split: str | None = None) -> list[Sample]:
        recs = self.records if split is None else self.split(split)
        return [self.sample(r) for r in recs]


def movie_overlaps(records: Iterable[ManifestRecord]) -> dict[str, float]:
    """Mean caption/context overlap per movie."""
    sums: dict[str, list[float]] = {}
    for r in records:
        sums.setdefault(r.movie_id, []).append(compute_overlap(r.caption, r.context))
    return {m: sum(v) / len(v) for m, v in sorted(sums.items())}


def filter_movies(manifest: DatasetManifest, threshold: float) -> tuple[DatasetManifest, dict[str, float]]:
    """Keep movies whose mean overlap is at least ``threshold``.
    Returns the filtered manifest and the per-movie means."""
    report = movie_overlaps(manifest.records)
    keep = {m for m, v in report.items() if v >= threshold}
    return DatasetManifest([r for r in manifest.records if r.movie_id in keep], manifest.root), report


def split_by_movie(
    movies: Iterable[str],
    seed: int,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    strata: dict[str, str] | None = None,
) -> dict[str, str]:
    """Seeded movie-level split, stratified by an optional label (e.g. genre).

    Within each stratum the movies are shuffled and assigned to train, val
    and test by cumulative fraction.
    """
    movies = sorted(set(movies))
    groups: dict[str, list[str]] = {}
    for m in movies:
        groups.setdefault((strata or {}).get(m, ""), []).append(m)
    rng = np.random.default_rng(seed)
    out = {}
    for key in sorted(groups):
        ms = list(groups[key])
        rng.shuffle(ms)
        n = len(ms)
        n_train = max(1, round(fractions[0] * n)) if n else 0
        n_val = round(fractions[1] * n) if n > 2 else 0
        for i, m in enumerate(ms):
            out[m] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    return out
