"""Named weight arrays and their on-disk ``MJW1`` container.

Layout (little-endian)::

    b"MJW1" | u32 n_entries
    per entry: u16 name_len | name (utf-8) | u8 rank | rank * u32 dims | float32 payload
    u64 checksum = sum of all payload bytes mod 2**64
"""
from __future__ import annotations

import math
import struct
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .errors import FormatError, NumericError, ShapeError

MAGIC = b"MJW1"
FORMAT_VERSION = 1


class WeightStore:
    """Immutable-by-convention map from names to float64 arrays.

    Values are rounded through float32 on insertion so that a store
    written to disk and read back behaves bit-identically.
    """

    def __init__(self, arrays: Optional[Dict[str, np.ndarray]] = None, seed=None,
                 version=FORMAT_VERSION):
        self._arrays: Dict[str, np.ndarray] = {}
        self.seed = seed
        self.version = version
        for name, arr in (arrays or {}).items():
            self._put(name, arr)

    def _put(self, name, arr):
        a = np.asarray(arr, dtype=np.float32).astype(np.float64)
        if not np.all(np.isfinite(a)):
            raise NumericError(f"weight {name!r} has non-finite values")
        a.flags.writeable = False
        self._arrays[name] = a

    def __getitem__(self, name) -> np.ndarray:
        try:
            return self._arrays[name]
        except KeyError:
            raise KeyError(f"weight {name!r} not present in store") from None

    def __contains__(self, name):
        return name in self._arrays

    def __len__(self):
        return len(self._arrays)

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def items(self):
        return self._arrays.items()

    def get(self, name, shape: Tuple[int, ...]) -> np.ndarray:
        a = self[name]
        if a.shape != tuple(shape):
            raise ShapeError(f"weight {name!r} has shape {a.shape}, expected {tuple(shape)}")
        return a

    def with_arrays(self, updates: Dict[str, np.ndarray]) -> "WeightStore":
        """Copy with some existing arrays replaced (same shapes)."""
        merged = dict(self._arrays)
        for k, v in updates.items():
            if k not in merged:
                raise KeyError(f"weight {k!r} not present in store")
            if np.shape(v) != merged[k].shape:
                raise ShapeError(f"replacement for {k!r} has shape {np.shape(v)}")
            merged[k] = v
        return WeightStore(merged, self.seed, self.version)

    @property
    def n_parameters(self) -> int:
        return sum(a.size for a in self._arrays.values())


class WeightInit:
    """Seeded builder: every tensor is uniform in +-1/sqrt(fan_in) unless stated."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.arrays: Dict[str, np.ndarray] = {}

    def uniform(self, name, shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        self.arrays[name] = self.rng.uniform(-bound, bound, shape)

    def range(self, name, shape, lo, hi):
        self.arrays[name] = self.rng.uniform(lo, hi, shape)

    def const(self, name, shape, value):
        self.arrays[name] = np.full(shape, float(value))

    def build(self) -> WeightStore:
        return WeightStore(self.arrays, seed=self.seed)


def _byte_sum(b: bytes) -> int:
    return int(np.frombuffer(b, dtype=np.uint8).sum(dtype=np.uint64))


def encode_weights(store: WeightStore) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(store))]
    checksum = 0
    for name, arr in store.items():
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF or arr.ndim > 0xFF:
            raise FormatError(f"weight {name!r} cannot be encoded")
        payload = arr.astype("<f4").tobytes()
        checksum = (checksum + _byte_sum(payload)) % (1 << 64)
        parts += [struct.pack("<H", len(nb)), nb, struct.pack("<B", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), payload]
    parts.append(struct.pack("<Q", checksum))
    return b"".join(parts)


def decode_weights(buf: bytes) -> WeightStore:
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"truncated weight file while reading {what}", pos)
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError("bad magic, expected MJW1", 0)
    (count,) = struct.unpack("<I", take(4, "entry count"))
    arrays = {}
    checksum = 0
    for _ in range(count):
        start = pos
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        try:
            name = take(nlen, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("weight name is not utf-8", start + 2) from None
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        payload = take(4 * math.prod(dims), f"payload of {name!r}")
        checksum = (checksum + _byte_sum(payload)) % (1 << 64)
        if name in arrays:
            raise FormatError(f"duplicate weight name {name!r}", start)
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
    at = pos
    (stored,) = struct.unpack("<Q", take(8, "checksum"))
    if stored != checksum:
        raise FormatError("payload checksum mismatch", at)
    if pos != len(buf):
        raise FormatError("trailing bytes after checksum", pos)
    return WeightStore(arrays)
