"""Interactive linear SVM trained on the sparse decompressed features.

The solver is dual coordinate descent for the L1-loss (hinge) soft-margin
problem, with the bias folded in as an implicit constant feature. Examples
are visited in a fixed order every epoch, so training is bit-for-bit
deterministic given the label sets and their ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import CompressedVector, decompress, dot

DEFAULT_C = 1.0
DUAL_TOL = 1e-4
MAX_EPOCHS = 1000

__all__ = ["LinearModel", "SparseRow", "train", "train_rows", "solve_dual", "score"]

SparseRow = list[tuple[int, float]]


@dataclass
class LinearModel:
    """Separating hyperplane for one modality."""

    weights: np.ndarray
    bias: float
    c: float = DEFAULT_C
    alpha: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {"weights": [float(v) for v in self.weights],
                "bias": float(self.bias), "c": float(self.c)}

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        return cls(weights=np.asarray(data["weights"], dtype=np.float64),
                   bias=float(data["bias"]), c=float(data.get("c", DEFAULT_C)))


def solve_dual(rows: list[SparseRow], y, c: float, dim: int,
               tol: float = DUAL_TOL, max_epochs: int = MAX_EPOCHS):
    """Dual coordinate descent; returns (augmented weights, alphas).

    Stops once the largest projected-gradient violation in an epoch falls
    below `tol`, or after `max_epochs` full passes.
    """
    n = len(rows)
    w = [0.0] * (dim + 1)
    alpha = [0.0] * n
    labels = [float(v) for v in y]
    qii = [sum(v * v for _, v in row) + 1.0 for row in rows]

    for _ in range(max_epochs):
        max_pg = 0.0
        for i in range(n):
            row = rows[i]
            yi = labels[i]
            g = w[dim]
            for fid, v in row:
                g += w[fid] * v
            g = yi * g - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a >= c:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            apg = -pg if pg < 0.0 else pg
            if apg > max_pg:
                max_pg = apg
            if apg > 1e-12:
                na = a - g / qii[i]
                if na < 0.0:
                    na = 0.0
                elif na > c:
                    na = c
                d = (na - a) * yi
                if d != 0.0:
                    alpha[i] = na
                    for fid, v in row:
                        w[fid] += d * v
                    w[dim] += d
        if max_pg < tol:
            break
    return np.array(w, dtype=np.float64), np.array(alpha, dtype=np.float64)


def train_rows(pos_rows: list[SparseRow], neg_rows: list[SparseRow],
               dim: int, c: float = DEFAULT_C) -> LinearModel:
    """Train from sparse (feature id, value) rows, positives first."""
    if not pos_rows or not neg_rows:
        raise ValueError("need both classes")
    rows = list(pos_rows) + list(neg_rows)
    y = [1.0] * len(pos_rows) + [-1.0] * len(neg_rows)
    w_aug, alpha = solve_dual(rows, y, c, dim)
    return LinearModel(weights=w_aug[:dim], bias=float(w_aug[dim]), c=c, alpha=alpha)


def _rows_from_vectors(vectors) -> list[SparseRow]:
    return [decompress(cv) for cv in vectors]


def train(positives, negatives, c: float = DEFAULT_C, dim: int | None = None) -> LinearModel:
    """Train on compressed vectors; `dim` is the modality dimensionality.

    When omitted, `dim` is inferred from the largest stored feature id.
    """
    pos_rows = _rows_from_vectors(positives)
    neg_rows = _rows_from_vectors(negatives)
    if not pos_rows or not neg_rows:
        raise ValueError("need both classes")
    if dim is None:
        stored = [fid for row in pos_rows + neg_rows for fid, _ in row]
        dim = max(stored) + 1 if stored else 1
    return train_rows(pos_rows, neg_rows, dim=dim, c=c)


def score(model: LinearModel, item: CompressedVector) -> float:
    """Decision value: compressed-domain dot with the weights, plus bias."""
    return dot(item, model.weights) + model.bias
