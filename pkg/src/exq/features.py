"""Feature statistics, TF-IDF selection and 6-slot vector compression.

Every item vector (one per modality) is reduced to its 6 strongest
features and packed into three 64-bit words:

  word 0   bits 0..59   six 10-bit feature ids, slot 0 in the low bits;
                        unused slots carry the sentinel id 1023
  word 1   bits 0..15   v1, the largest kept value, linear 16-bit on [0, 1]
           bits 16..31  r2 = value2 / value1, same quantization
           bits 32..47  r3 = value3 / value2
  word 2   bits 0..15   r4; bits 16..31 r5; bits 32..47 r6

Slots are ordered by value descending, so each chained ratio lies in
[0, 1] and decompressed values are non-increasing. A two-modality item
is exactly 48 bytes on disk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

SLOTS = 6
SENTINEL_ID = 1023
MAX_DIM = 1023  # 10-bit ids with 1023 reserved as sentinel
_Q = 65535.0  # 16-bit quantization denominator

__all__ = [
    "SLOTS",
    "SENTINEL_ID",
    "MAX_DIM",
    "FeatureStats",
    "CompressedVector",
    "compute_feature_stats",
    "tfidf",
    "compress",
    "compress_collection",
    "decompress",
    "unpack_slots",
    "dot",
    "distance",
]


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature collection statistics backing the TF-IDF selection."""

    n: int
    mu: np.ndarray
    sigma: np.ndarray
    strong_count: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.mu)

    def idf(self) -> np.ndarray:
        """ln(1 + N / strong_count), with zero counts treated as 1."""
        denom = np.maximum(self.strong_count, 1).astype(np.float64)
        return np.log1p(self.n / denom)


@dataclass(frozen=True)
class CompressedVector:
    """One modality's vector as three 64-bit words."""

    words: tuple[int, int, int]

    def slots(self) -> list[tuple[int, float]]:
        """Decompressed (feature id, value) pairs, sentinel slots omitted."""
        return decompress(self)

    def to_row(self) -> np.ndarray:
        return np.array(self.words, dtype=np.uint64)

    @classmethod
    def from_row(cls, row: np.ndarray) -> "CompressedVector":
        return cls(words=(int(row[0]), int(row[1]), int(row[2])))


def compute_feature_stats(collection) -> FeatureStats:
    """Population mean/std per feature plus the strong-presence counts.

    strong_count[f] counts items whose value exceeds mu[f] + sigma[f].
    """
    mat = np.asarray(collection, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.size == 0 or mat.shape[0] == 0:
        raise ValueError("empty collection")
    if mat.ndim != 2:
        raise ValueError("mixed dimensionality")
    n = mat.shape[0]
    mu = mat.mean(axis=0)
    sigma = mat.std(axis=0)  # population std
    strong = (mat > (mu + sigma)[None, :]).sum(axis=0).astype(np.int64)
    return FeatureStats(n=n, mu=mu, sigma=sigma, strong_count=strong)


def tfidf(x_f: float, f: int, stats: FeatureStats) -> float:
    """x_f * ln(1 + N / strong_count[f]); zero counts fall back to 1."""
    count = int(stats.strong_count[f])
    if count == 0:
        count = 1
    return float(x_f) * float(np.log1p(stats.n / count))


def _quantize(values: np.ndarray) -> np.ndarray:
    """Linear 16-bit quantization on [0, 1], round-to-nearest."""
    return np.rint(values * _Q).astype(np.uint64)


def compress_collection(dense: np.ndarray, stats: FeatureStats) -> np.ndarray:
    """Compress an (N, D) dense matrix to an (N, 3) uint64 word array.

    Selection keeps the 6 highest-tfidf features per row (ties to the
    lower feature id); slots are ordered by value descending.
    """
    mat = np.asarray(dense, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    n, d = mat.shape
    if d != stats.dim:
        raise ValueError("vector dimensionality does not match stats")
    if d > MAX_DIM:
        raise ValueError("dimensionality exceeds id width")

    oob = (mat < 0.0) | (mat > 1.0)
    if oob.any():
        log.warning("clamping %d feature values outside [0, 1]", int(oob.sum()))
        mat = np.clip(mat, 0.0, 1.0)

    scores = mat * stats.idf()[None, :]
    # Stable sort on -score keeps lower feature ids first among ties.
    order = np.argsort(-scores, axis=1, kind="stable")[:, :SLOTS]
    sel_vals = np.take_along_axis(mat, order, axis=1)
    if order.shape[1] < SLOTS:
        pad = SLOTS - order.shape[1]
        order = np.concatenate([order, np.zeros((n, pad), dtype=order.dtype)], axis=1)
        sel_vals = np.concatenate([sel_vals, np.zeros((n, pad))], axis=1)
    real = sel_vals > 0.0
    # Zero-valued picks are only padding from rows with < 6 nonzero features.
    ids = np.where(real, order, SENTINEL_ID).astype(np.uint64)

    # Reorder the kept slots by value descending, ties to the lower id.
    slot_order = np.lexsort((ids, -sel_vals), axis=1)
    vals = np.take_along_axis(sel_vals, slot_order, axis=1)
    ids = np.take_along_axis(ids, slot_order, axis=1)
    real = np.take_along_axis(real, slot_order, axis=1)

    # v1 plus chained ratios of successive raw values.
    fields = np.zeros((n, SLOTS), dtype=np.float64)
    fields[:, 0] = vals[:, 0]
    prev = vals[:, 0]
    for s in range(1, SLOTS):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(prev > 0.0, vals[:, s] / prev, 0.0)
        fields[:, s] = np.where(real[:, s], ratio, 0.0)
        prev = np.where(real[:, s], vals[:, s], prev)
    q = _quantize(fields)

    words = np.zeros((n, 3), dtype=np.uint64)
    for s in range(SLOTS):
        words[:, 0] |= ids[:, s] << np.uint64(10 * s)
    words[:, 1] = q[:, 0] | (q[:, 1] << np.uint64(16)) | (q[:, 2] << np.uint64(32))
    words[:, 2] = q[:, 3] | (q[:, 4] << np.uint64(16)) | (q[:, 5] << np.uint64(32))
    return words


def compress(vector, stats: FeatureStats) -> CompressedVector:
    """Compress a single dense vector."""
    row = compress_collection(np.asarray(vector, dtype=np.float64).reshape(1, -1), stats)
    return CompressedVector.from_row(row[0])


def unpack_slots(words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unpack (N, 3) words into (N, 6) feature ids and decompressed values.

    Sentinel slots keep id 1023 and value 0.
    """
    w = np.asarray(words, dtype=np.uint64)
    if w.ndim == 1:
        w = w.reshape(1, 3)
    n = w.shape[0]
    ids = np.empty((n, SLOTS), dtype=np.uint16)
    for s in range(SLOTS):
        ids[:, s] = (w[:, 0] >> np.uint64(10 * s)) & np.uint64(0x3FF)
    q = np.empty((n, SLOTS), dtype=np.float64)
    q[:, 0] = (w[:, 1] & np.uint64(0xFFFF)).astype(np.float64)
    q[:, 1] = ((w[:, 1] >> np.uint64(16)) & np.uint64(0xFFFF)).astype(np.float64)
    q[:, 2] = ((w[:, 1] >> np.uint64(32)) & np.uint64(0xFFFF)).astype(np.float64)
    q[:, 3] = (w[:, 2] & np.uint64(0xFFFF)).astype(np.float64)
    q[:, 4] = ((w[:, 2] >> np.uint64(16)) & np.uint64(0xFFFF)).astype(np.float64)
    q[:, 5] = ((w[:, 2] >> np.uint64(32)) & np.uint64(0xFFFF)).astype(np.float64)

    vals = np.empty((n, SLOTS), dtype=np.float64)
    vals[:, 0] = q[:, 0] / _Q
    for s in range(1, SLOTS):
        vals[:, s] = vals[:, s - 1] * (q[:, s] / _Q)
    vals[ids == SENTINEL_ID] = 0.0
    return ids, vals


def decompress(cv: CompressedVector) -> list[tuple[int, float]]:
    """(feature id, value) pairs in slot order; sentinel slots omitted."""
    ids, vals = unpack_slots(cv.to_row())
    return [
        (int(ids[0, s]), float(vals[0, s]))
        for s in range(SLOTS)
        if ids[0, s] != SENTINEL_ID
    ]


def dot(cv: CompressedVector, weights) -> float:
    """Sparse dot product against a dense weight vector.

    At most 6 multiply-adds; the item vector is never densified.
    """
    w = np.asarray(weights, dtype=np.float64)
    acc = 0.0
    for fid, val in decompress(cv):
        if fid >= len(w):
            raise ValueError("id out of range")
        acc += val * float(w[fid])
    return acc


def distance(a: CompressedVector, b: CompressedVector) -> float:
    """Euclidean distance over the union of the two sparse feature sets."""
    av = dict(decompress(a))
    bv = dict(decompress(b))
    acc = 0.0
    for fid in sorted(set(av) | set(bv)):
        diff = av.get(fid, 0.0) - bv.get(fid, 0.0)
        acc += diff * diff
    return float(np.sqrt(acc))
