"""Binary collection files and in-memory modality containers.

Two little-endian formats, one file per modality:

  EXQD (dense input)      magic "EXQD", u32 version, u32 D, u64 count,
                          then count x D float32, row-major
  EXQC (compressed)       magic "EXQC", u32 version, u32 D, u64 count,
                          then count records of three u64 words

A record is 24 bytes, so a two-modality item costs 48 bytes across its
pair of EXQC files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import MAX_DIM, SENTINEL_ID, unpack_slots

DENSE_MAGIC = b"EXQD"
COMPRESSED_MAGIC = b"EXQC"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")

__all__ = [
    "FormatError",
    "ModalityVectors",
    "Collection",
    "write_dense",
    "parse_dense",
    "read_dense",
    "write_compressed",
    "read_compressed",
]


class FormatError(ValueError):
    """Raised when a collection file fails structural validation."""


def _read_header(raw: bytes, magic: bytes, path) -> tuple[int, int]:
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got, version, dim, count = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim == 0 or dim > MAX_DIM:
        raise FormatError(f"{path}: dimensionality {dim} out of range")
    return dim, count


def write_dense(path, matrix: np.ndarray) -> None:
    mat = np.ascontiguousarray(np.asarray(matrix, dtype=np.float32))
    if mat.ndim != 2:
        raise ValueError("dense matrix must be 2-D")
    n, d = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DENSE_MAGIC, FORMAT_VERSION, d, n))
        fh.write(mat.astype("<f4").tobytes())


def parse_dense(raw: bytes, label="<memory>") -> np.ndarray:
    dim, count = _read_header(raw, DENSE_MAGIC, label)
    body = raw[_HEADER.size:]
    expected = count * dim * 4
    if len(body) != expected:
        raise FormatError(f"{label}: body is {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype="<f4").reshape(count, dim).astype(np.float64)


def read_dense(path) -> np.ndarray:
    return parse_dense(Path(path).read_bytes(), label=str(path))


def write_compressed(path, dim: int, words: np.ndarray) -> None:
    w = np.ascontiguousarray(np.asarray(words, dtype=np.uint64))
    if w.ndim != 2 or w.shape[1] != 3:
        raise ValueError("compressed words must be (N, 3)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(COMPRESSED_MAGIC, FORMAT_VERSION, dim, w.shape[0]))
        fh.write(w.astype("<u8").tobytes())


def read_compressed(path) -> "ModalityVectors":
    raw = Path(path).read_bytes()
    dim, count = _read_header(raw, COMPRESSED_MAGIC, path)
    body = raw[_HEADER.size:]
    expected = count * 24
    if len(body) != expected:
        raise FormatError(f"{path}: body is {len(body)} bytes, expected {expected}")
    words = np.frombuffer(body, dtype="<u8").reshape(count, 3).copy()
    return ModalityVectors(dim=dim, words=words)


@dataclass
class ModalityVectors:
    """All compressed vectors of one modality, with decoded slot caches."""

    dim: int
    words: np.ndarray
    _slot_ids: np.ndarray | None = field(default=None, repr=False)
    _slot_vals: np.ndarray | None = field(default=None, repr=False)
    _ids_list: list | None = field(default=None, repr=False)
    _vals_list: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.uint64)
        if self.words.ndim != 2 or self.words.shape[1] != 3:
            raise ValueError("compressed words must be (N, 3)")

    def __len__(self) -> int:
        return self.words.shape[0]

    def _decode(self) -> None:
        if self._slot_ids is None:
            self._slot_ids, self._slot_vals = unpack_slots(self.words)

    @property
    def slot_ids(self) -> np.ndarray:
        self._decode()
        return self._slot_ids

    @property
    def slot_vals(self) -> np.ndarray:
        self._decode()
        return self._slot_vals

    def slot_lists(self) -> tuple[list, list]:
        """Per-item python lists of slot ids/values for the scoring loop.

        Built once and cached; sentinel slots stay in place with value 0
        so every item is a flat 6-slot record.
        """
        if self._ids_list is None:
            self._ids_list = self.slot_ids.tolist()
            self._vals_list = self.slot_vals.tolist()
        return self._ids_list, self._vals_list

    def norms_sq(self) -> np.ndarray:
        """Per-item squared norms accumulated in slot order."""
        vals = self.slot_vals
        acc = vals[:, 0] * vals[:, 0]
        for s in range(1, vals.shape[1]):
            acc = acc + vals[:, s] * vals[:, s]
        return acc

    def pad_weights(self, weights: np.ndarray) -> np.ndarray:
        """Extend a weight vector to id width so sentinel slots score 0."""
        w = np.asarray(weights, dtype=np.float64)
        if len(w) < self.dim:
            raise ValueError("weight vector shorter than modality dimensionality")
        padded = np.zeros(SENTINEL_ID + 1, dtype=np.float64)
        padded[: len(w)] = w
        return padded

    def bulk_scores(self, weights: np.ndarray, bias: float = 0.0) -> np.ndarray:
        """Decision scores for every item: slot-ordered dot plus bias.

        Accumulation order matches the scalar scoring loop bit for bit.
        """
        w = self.pad_weights(weights)
        ids, vals = self.slot_ids, self.slot_vals
        acc = vals[:, 0] * w[ids[:, 0]]
        for s in range(1, ids.shape[1]):
            acc = acc + vals[:, s] * w[ids[:, s]]
        return acc + bias


@dataclass
class Collection:
    """A two-modality compressed collection."""

    visual: ModalityVectors
    text: ModalityVectors

    def __post_init__(self):
        if len(self.visual) != len(self.text):
            raise ValueError("modality count mismatch")

    def __len__(self) -> int:
        return len(self.visual)

    def modality(self, name: str) -> ModalityVectors:
        if name == "visual":
            return self.visual
        if name == "text":
            return self.text
        raise KeyError(name)

    @classmethod
    def load(cls, visual_path, text_path) -> "Collection":
        return cls(visual=read_compressed(visual_path), text=read_compressed(text_path))


MODALITIES = ("visual", "text")
