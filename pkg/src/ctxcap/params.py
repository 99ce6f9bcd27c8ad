"""Named parameter container and the binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    magic      8 bytes   b"CTXCKPT1"
    hlen       uint32    length of the JSON manifest in bytes
    manifest   hlen bytes UTF-8 JSON: {"tensors": [{"name", "dtype", "shape",
               "offset", "nbytes"}, ...], "meta": {...}}
    payload    raw little-endian tensor values, C order, at the listed offsets
               (relative to the start of the payload)
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .tensor import Tensor

MAGIC = b"CTXCKPT1"
_DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(ValueError):
    pass


class ParamStore:
    """Ordered, name-addressed collection of trainable tensors.

    Iteration is always in sorted-name order so that optimizer updates and
    serialization are deterministic.
    """

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.rng_seed = int(seed)
        self.dtype = np.dtype(dtype)
        self._rng = np.random.default_rng(self.rng_seed)
        self._params: dict[str, Tensor] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._params))

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in sorted(self._params) if n.startswith(prefix)]

    def items(self):
        return [(n, self._params[n]) for n in sorted(self._params)]

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def create(self, name: str, shape: tuple[int, ...], init: str = "auto") -> Tensor:
        """Create a parameter.  Matrices draw from U(-k, k) with
        k = 1/sqrt(fan_in) where fan_in = shape[0]; biases start at zero."""
        if init == "auto":
            init = "zeros" if len(shape) == 1 else "uniform"
        if init == "zeros":
            value = np.zeros(shape)
        elif init == "uniform":
            k = 1.0 / np.sqrt(shape[0])
            value = self._rng.uniform(-k, k, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        return self.add(name, value)

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def set_trainable(self, names) -> None:
        names = set(names)
        for n, t in self._params.items():
            t.requires_grad = n in names

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.items()}

    def load_state(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        for n, t in self._params.items():
            if n not in state:
                if strict:
                    raise CheckpointError(f"checkpoint lacks parameter {n!r}")
                continue
            value = np.asarray(state[n])
            if value.shape != t.shape:
                raise CheckpointError(f"parameter {n!r}: shape {value.shape} != {t.shape}")
            t.data = value.astype(self.dtype, copy=True)

    def astype(self, dtype) -> "ParamStore":
        other = ParamStore(self.rng_seed, dtype)
        for n, t in self.items():
            other.add(n, t.data)
        return other

    def checksum(self, prefix: str = "") -> str:
        h = hashlib.sha256()
        for n in self.names(prefix):
            h.update(n.encode())
            h.update(np.ascontiguousarray(self._params[n].data).tobytes())
        return h.hexdigest()


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        dt = arr.dtype.name
        if dt not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {dt} for {name!r}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[dt]).tobytes()
        entries.append({"name": name, "dtype": dt, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack_from("<I", data, 8)
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    base = 12 + hlen
    out = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        raw = data[start:start + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for {e['name']!r}")
        arr = np.frombuffer(raw, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"])
        out[e["name"]] = arr.astype(e["dtype"])
    return out, header["meta"]
