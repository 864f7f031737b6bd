"""Per-round suggestion pipeline.

Three phases per modality and segment: pick the b highest-scoring
clusters, score their members keeping the top r unseen candidates, then
fuse the two modalities by average rank over the pooled candidates. The
b selected clusters are split in selection order into S_c contiguous
segments, each fused to k suggestions independently; with more than one
segment the segment outputs are pooled and fused once more. Workers
process whole blocks of S_c/w segments, so the result is independent of
the worker count.

All orderings break ties toward the lower item id.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .index import ClusterIndex
from .learner import LinearModel
from .storage import Collection, ModalityVectors

__all__ = [
    "RetrievalParams",
    "Candidate",
    "SuggestionList",
    "RoundStats",
    "score_cluster_set",
    "fuse",
    "rank_fuse",
    "retrieve",
]


@dataclass(frozen=True)
class RetrievalParams:
    """Knobs of the suggestion pipeline."""

    k: int = 25
    r: int = 100
    b: int = 64
    w: int = 1
    s_c: int = 1
    s_m: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.r < self.k:
            raise ValueError("r must be at least k")
        if self.w < 1:
            raise ValueError("worker count must be at least 1")
        if self.s_c < 1:
            raise ValueError("segment count must be at least 1")
        if self.s_c % self.w != 0:
            raise ValueError("worker count must divide segment count")
        if self.b < self.s_c:
            raise ValueError("b must be at least the segment count")
        if self.s_m is not None and self.s_m < 0:
            raise ValueError("cluster size threshold must be non-negative")

    def to_dict(self) -> dict:
        return {"k": self.k, "r": self.r, "b": self.b, "w": self.w,
                "s_c": self.s_c, "s_m": self.s_m}

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalParams":
        return cls(**{key: data[key] for key in ("k", "r", "b", "w", "s_c", "s_m") if key in data})


@dataclass
class Candidate:
    """An item with both modality scores and its fusion bookkeeping."""

    item_id: int
    score_visual: float
    score_text: float
    rank_visual: int = 0
    rank_text: int = 0
    avg_rank: float = 0.0


@dataclass
class SuggestionList:
    """Final ordered suggestions of one round."""

    items: list[Candidate] = field(default_factory=list)

    def ids(self) -> list[int]:
        return [c.item_id for c in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


@dataclass
class RoundStats:
    """Per-round phase timings and scoring volume."""

    round: int = 0
    select_ms: float = 0.0
    score_ms: float = 0.0
    fuse_ms: float = 0.0
    train_ms: float = 0.0
    retrieve_ms: float = 0.0
    clusters_scored: int = 0
    items_scored: int = 0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "latency_ms": {"select": self.select_ms, "score": self.score_ms,
                           "fuse": self.fuse_ms, "train": self.train_ms},
            "retrieve_ms": self.retrieve_ms,
            "clusters_scored": self.clusters_scored,
            "items_scored": self.items_scored,
        }


@dataclass(frozen=True)
class _Scorer:
    """Padded weights in both list and array form plus the bias."""

    w_list: list
    w_arr: np.ndarray
    bias: float


def _prepare_scorer(vectors: ModalityVectors, model: LinearModel) -> _Scorer:
    padded = vectors.pad_weights(model.weights)
    return _Scorer(w_list=padded.tolist(), w_arr=padded, bias=float(model.bias))


def _batch_scores(vectors: ModalityVectors, item_ids, scorer: _Scorer) -> np.ndarray:
    """Slot-chain scores for a batch of items, matching the scalar loop."""
    rows = np.asarray(item_ids, dtype=np.int64)
    ids = vectors.slot_ids[rows]
    vals = vectors.slot_vals[rows]
    w = scorer.w_arr
    acc = vals[:, 0] * w[ids[:, 0]]
    for s in range(1, ids.shape[1]):
        acc = acc + vals[:, s] * w[ids[:, s]]
    return acc + scorer.bias


def score_cluster_set(index: ClusterIndex, cluster_ids, vectors: ModalityVectors,
                      model: LinearModel, r: int, excluded,
                      prepared: _Scorer | None = None) -> tuple[list[tuple[int, float]], int]:
    """Top-r (item id, score) from the given clusters, excluded ids skipped.

    Returns the candidates ordered by descending score (ties to the lower
    id) together with the number of items actually scored. Fewer than r
    candidates simply means the clusters did not hold more.
    """
    scorer = prepared if prepared is not None else _prepare_scorer(vectors, model)
    w = scorer.w_list
    bias = scorer.bias
    heap: list[tuple[float, int]] = []  # min-heap of (score, -id)
    scored = 0
    for cid in cluster_ids:
        members, ids_l, vals_l = index.cluster_slot_lists(cid, vectors)
        for item, f, v in zip(members, ids_l, vals_l):
            if item in excluded:
                continue
            s = (v[0] * w[f[0]] + v[1] * w[f[1]] + v[2] * w[f[2]]
                 + v[3] * w[f[3]] + v[4] * w[f[4]] + v[5] * w[f[5]]) + bias
            scored += 1
            entry = (s, -item)
            if len(heap) < r:
                heapq.heappush(heap, entry)
            elif entry > heap[0]:
                heapq.heapreplace(heap, entry)
    ordered = sorted(heap, key=lambda e: (-e[0], -e[1]))
    return [(-neg_id, s) for s, neg_id in ordered], scored


def _rank_fuse_arrays(ids: np.ndarray, sv: np.ndarray, st: np.ndarray, k: int) -> SuggestionList:
    """Average-rank fusion over a pool with both scores; ties to lower id."""
    n = len(ids)
    if n == 0:
        return SuggestionList()
    rank_v = np.empty(n, dtype=np.int64)
    rank_v[np.lexsort((ids, -sv))] = np.arange(1, n + 1)
    rank_t = np.empty(n, dtype=np.int64)
    rank_t[np.lexsort((ids, -st))] = np.arange(1, n + 1)
    avg = (rank_v + rank_t) / 2.0
    final = np.lexsort((ids, avg))[:k]
    return SuggestionList(items=[
        Candidate(item_id=int(ids[i]), score_visual=float(sv[i]), score_text=float(st[i]),
                  rank_visual=int(rank_v[i]), rank_text=int(rank_t[i]),
                  avg_rank=float(avg[i]))
        for i in final
    ])


def rank_fuse(candidates: list[Candidate], k: int) -> SuggestionList:
    """Average-rank fusion over a candidate pool that has both scores."""
    n = len(candidates)
    ids = np.fromiter((c.item_id for c in candidates), dtype=np.int64, count=n)
    sv = np.fromiter((c.score_visual for c in candidates), dtype=np.float64, count=n)
    st = np.fromiter((c.score_text for c in candidates), dtype=np.float64, count=n)
    return _rank_fuse_arrays(ids, sv, st, k)


def fuse(candidates_visual, candidates_text, k: int, collection: Collection,
         model_visual: LinearModel, model_text: LinearModel,
         prepared_visual: _Scorer | None = None,
         prepared_text: _Scorer | None = None) -> SuggestionList:
    """Fuse per-modality candidate lists into k suggestions.

    Ids surfaced by the visual list are dropped from the text list; a
    candidate's missing modality score is computed by direct compressed
    lookup before ranking the pooled candidates in each modality.
    """
    visual_ids = {item for item, _ in candidates_visual}
    text_scores = dict(candidates_text)
    scorer_v = prepared_visual if prepared_visual is not None \
        else _prepare_scorer(collection.visual, model_visual)
    scorer_t = prepared_text if prepared_text is not None \
        else _prepare_scorer(collection.text, model_text)

    text_only = [(item, st) for item, st in candidates_text if item not in visual_ids]
    pool_ids: list[int] = []
    pool_sv: list[float] = []
    pool_st: list[float] = []
    missing_text: list[int] = []  # positions in the pool to backfill
    for item, sv in candidates_visual:
        pool_ids.append(item)
        pool_sv.append(sv)
        known = text_scores.get(item)
        if known is None:
            missing_text.append(len(pool_st))
            pool_st.append(0.0)
        else:
            pool_st.append(known)
    for item, st in text_only:
        pool_ids.append(item)
        pool_sv.append(0.0)
        pool_st.append(st)
    if not pool_ids:
        return SuggestionList()

    ids = np.array(pool_ids, dtype=np.int64)
    sv = np.array(pool_sv, dtype=np.float64)
    st = np.array(pool_st, dtype=np.float64)
    if missing_text:
        st[missing_text] = _batch_scores(collection.text, ids[missing_text], scorer_t)
    if text_only:
        start = len(candidates_visual)
        sv[start:] = _batch_scores(collection.visual, ids[start:], scorer_v)
    return _rank_fuse_arrays(ids, sv, st, k)


def _partition(items: list, parts: int) -> list[list]:
    """Contiguous split into `parts` segments; leading ones get the extra."""
    base, extra = divmod(len(items), parts)
    out, pos = [], 0
    for i in range(parts):
        size = base + (1 if i < extra else 0)
        out.append(items[pos:pos + size])
        pos += size
    return out


def retrieve(session, params: RetrievalParams, index_visual: ClusterIndex,
             index_text: ClusterIndex, collection: Collection) -> tuple[SuggestionList, RoundStats]:
    """Run one full suggestion round for the session's current models."""
    models = getattr(session, "models", None) or {}
    if "visual" not in models or "text" not in models:
        raise ValueError("no model")
    model_v = models["visual"]
    model_t = models["text"]
    excluded = set(session.seen)
    stats = RoundStats()
    t_start = time.perf_counter()

    index_visual.warm_cluster_cache(collection.visual)
    index_text.warm_cluster_cache(collection.text)

    t0 = time.perf_counter()
    selected_v = index_visual.select_clusters(model_v, params.b, params.s_m)
    selected_t = index_text.select_clusters(model_t, params.b, params.s_m)
    stats.select_ms = (time.perf_counter() - t0) * 1000.0
    stats.clusters_scored = len(selected_v) + len(selected_t)

    segments = list(zip(_partition(selected_v, params.s_c), _partition(selected_t, params.s_c)))
    prepared_v = _prepare_scorer(collection.visual, model_v)
    prepared_t = _prepare_scorer(collection.text, model_t)

    def run_segment(seg: tuple[list[int], list[int]]) -> tuple[SuggestionList, float, float, int]:
        seg_v, seg_t = seg
        t1 = time.perf_counter()
        cands_v, n_v = score_cluster_set(index_visual, seg_v, collection.visual,
                                         model_v, params.r, excluded, prepared=prepared_v)
        cands_t, n_t = score_cluster_set(index_text, seg_t, collection.text,
                                         model_t, params.r, excluded, prepared=prepared_t)
        t2 = time.perf_counter()
        fused = fuse(cands_v, cands_t, params.k, collection, model_v, model_t,
                     prepared_visual=prepared_v, prepared_text=prepared_t)
        t3 = time.perf_counter()
        return fused, (t2 - t1) * 1000.0, (t3 - t2) * 1000.0, n_v + n_t

    if params.w == 1 or params.s_c == 1:
        segment_results = [run_segment(seg) for seg in segments]
    else:
        blocks = _partition(segments, params.w)
        with ThreadPoolExecutor(max_workers=params.w) as pool:
            block_results = list(pool.map(lambda block: [run_segment(s) for s in block], blocks))
        segment_results = [res for block in block_results for res in block]

    for _, score_ms, fuse_ms, scored in segment_results:
        stats.score_ms += score_ms
        stats.fuse_ms += fuse_ms
        stats.items_scored += scored

    if params.s_c == 1:
        final = segment_results[0][0]
    else:
        t4 = time.perf_counter()
        pooled: list[Candidate] = []
        seen_ids: set[int] = set()
        for fused, _, _, _ in segment_results:
            for cand in fused.items:
                if cand.item_id in seen_ids:
                    continue
                seen_ids.add(cand.item_id)
                pooled.append(Candidate(item_id=cand.item_id, score_visual=cand.score_visual,
                                        score_text=cand.score_text))
        final = rank_fuse(pooled, params.k)
        stats.fuse_ms += (time.perf_counter() - t4) * 1000.0

    stats.retrieve_ms = (time.perf_counter() - t_start) * 1000.0
    return final, stats
