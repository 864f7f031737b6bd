"""Independent reference implementations used to cross-check the engine.

Selection and fusion logic here is written from scratch against the
contracts (full sorts instead of heaps, explicit rank dictionaries); raw
decision scores use the same slot-ordered accumulation as the engine so
equality checks can be exact.
"""

from __future__ import annotations

import numpy as np

from exq.features import SENTINEL_ID
from exq.storage import Collection


def two_pass_stats(matrix: np.ndarray):
    """Naive population mean/std plus strong counts, feature by feature."""
    mat = np.asarray(matrix, dtype=np.float64)
    n, d = mat.shape
    mu = np.empty(d)
    sigma = np.empty(d)
    strong = np.empty(d, dtype=np.int64)
    for f in range(d):
        col = mat[:, f]
        mu[f] = sum(col) / n
        sigma[f] = (sum((v - mu[f]) ** 2 for v in col) / n) ** 0.5
        strong[f] = sum(1 for v in col if v > mu[f] + sigma[f])
    return mu, sigma, strong


def padded_weights(model, width: int = SENTINEL_ID + 1) -> np.ndarray:
    w = np.zeros(width, dtype=np.float64)
    w[: len(model.weights)] = model.weights
    return w


def modality_scores(vectors, model) -> np.ndarray:
    """Slot-ordered score chain for every item, plus bias."""
    w = padded_weights(model)
    ids, vals = vectors.slot_ids, vectors.slot_vals
    acc = vals[:, 0] * w[ids[:, 0]]
    for s in range(1, ids.shape[1]):
        acc = acc + vals[:, s] * w[ids[:, s]]
    return acc + model.bias


def full_scan_suggestions(collection: Collection, models: dict, seen, k: int, r: int):
    """Brute-force three-phase pipeline: full scan, top-r, rank fusion."""
    scores = {name: modality_scores(collection.modality(name), models[name])
              for name in ("visual", "text")}
    n = len(collection)
    mask = np.ones(n, dtype=bool)
    for i in seen:
        if 0 <= i < n:
            mask[i] = False
    avail = np.flatnonzero(mask)

    def top_r(score_arr):
        order = np.lexsort((avail, -score_arr[avail]))
        return [int(avail[i]) for i in order[:r]]

    top_v = top_r(scores["visual"])
    top_t = top_r(scores["text"])
    vset = set(top_v)
    pool = top_v + [i for i in top_t if i not in vset]
    if not pool:
        return []
    sv, st = scores["visual"], scores["text"]
    rank_v = {i: p for p, i in enumerate(sorted(pool, key=lambda i: (-sv[i], i)), start=1)}
    rank_t = {i: p for p, i in enumerate(sorted(pool, key=lambda i: (-st[i], i)), start=1)}
    avg = {i: (rank_v[i] + rank_t[i]) / 2.0 for i in pool}
    final = sorted(pool, key=lambda i: (avg[i], i))[:k]
    return [(i, float(sv[i]), float(st[i]), avg[i]) for i in final]


def greedy_assign(index, slots: list[tuple[int, float]]) -> int:
    """Re-walk the hierarchy greedily with scalar arithmetic."""
    q_vals = [v for _, v in slots]
    na = 0.0
    for v in q_vals:
        na = na + v * v

    def d2(level, node):
        dense = {int(f): float(v) for f, v in
                 zip(level.slot_ids[node], level.slot_vals[node])
                 if f != SENTINEL_ID}
        nb = 0.0
        for v in level.slot_vals[node]:
            nb = nb + float(v) * float(v)
        acc = 0.0
        for fid, val in slots:
            acc = acc + val * dense.get(fid, 0.0)
        return (na + nb) - 2.0 * acc

    depth = index.levels_count - 1
    fert = index._fertility(depth)
    cand = [i for i in range(len(index.levels[0])) if fert[0][i]]
    best = min(cand, key=lambda i: (d2(index.levels[0], i), i))
    for k in range(1, depth + 1):
        kids = [int(c) for c in index.levels[k - 1].children[best] if fert[k][c]]
        best = min(kids, key=lambda i: (d2(index.levels[k], i), i))
    return best


def dense_rows(rows, dim: int) -> np.ndarray:
    """Sparse rows to a dense matrix with the trailing bias column."""
    x = np.zeros((len(rows), dim + 1))
    for i, row in enumerate(rows):
        for fid, val in row:
            x[i, fid] = val
        x[i, dim] = 1.0
    return x


def dual_objective(rows, y, dim: int, alpha: np.ndarray) -> float:
    """0.5 a'Qa - sum(a) with Q from the bias-augmented gram matrix."""
    x = dense_rows(rows, dim)
    ya = np.asarray(y, dtype=np.float64)[:, None] * x
    q = ya @ ya.T
    a = np.asarray(alpha, dtype=np.float64)
    return float(0.5 * a @ q @ a - a.sum())


def reference_dual_qp(rows, y, c: float, dim: int):
    """Box-constrained dual solved by a generic optimizer (SLSQP)."""
    from scipy.optimize import minimize

    x = dense_rows(rows, dim)
    ya = np.asarray(y, dtype=np.float64)[:, None] * x
    q = ya @ ya.T
    n = len(rows)

    def fun(a):
        return 0.5 * a @ q @ a - a.sum()

    def jac(a):
        return q @ a - 1.0

    best = None
    for start in (np.zeros(n), np.full(n, c / 2.0), np.full(n, c)):
        res = minimize(fun, start, jac=jac, bounds=[(0.0, c)] * n,
                       method="SLSQP", options={"maxiter": 1000, "ftol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res
    return best.x, float(best.fun)
