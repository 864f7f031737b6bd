"""Hierarchical cluster index over one modality's compressed vectors.

Construction samples 1% of the current set (floor, minimum 1) as the
representatives of the level above and recurses until fewer than 100
remain, which form the root. Every set member is then attached to its
nearest representative via greedy top-down descent, and finally the
whole collection is assigned to the bottom-level representatives, whose
buckets are the clusters. No refinement iterations are run: the single
assignment pass is intentional, keeping cluster sizes from skewing.

All distances are squared Euclidean over the sparse decompressed
features; ties always resolve to the lower node id.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .features import SENTINEL_ID, CompressedVector, unpack_slots
from .storage import FormatError, ModalityVectors

INDEX_MAGIC = b"EXQI"
INDEX_VERSION = 1
ROOT_CAP = 100  # recursion stops below this many representatives
SAMPLE_RATE = 100  # one representative per this many members

_MODALITY_CODES = {"visual": 0, "text": 1}
_MODALITY_NAMES = {v: k for k, v in _MODALITY_CODES.items()}

_CHUNK = 65536
_ID_WIDTH = SENTINEL_ID + 1

__all__ = ["Level", "Cluster", "ClusterIndex", "create_index", "save_index", "load_index"]


@dataclass
class Level:
    """One representative level; children point into the level below."""

    words: np.ndarray
    slot_ids: np.ndarray = field(init=False)
    slot_vals: np.ndarray = field(init=False)
    norms: np.ndarray = field(init=False)
    children: list = field(default_factory=list)
    _dense_t: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.slot_ids, self.slot_vals = unpack_slots(self.words)
        acc = self.slot_vals[:, 0] * self.slot_vals[:, 0]
        for s in range(1, self.slot_vals.shape[1]):
            acc = acc + self.slot_vals[:, s] * self.slot_vals[:, s]
        self.norms = acc

    def __len__(self) -> int:
        return self.words.shape[0]

    def dense_t(self) -> np.ndarray:
        """(id width, n) scatter of representative values, cached."""
        if self._dense_t is None:
            n = len(self)
            dense = np.zeros((n, _ID_WIDTH), dtype=np.float64)
            rows = np.repeat(np.arange(n), self.slot_ids.shape[1])
            dense[rows, self.slot_ids.ravel()] = self.slot_vals.ravel()
            dense[:, SENTINEL_ID] = 0.0
            self._dense_t = dense.T.copy()
        return self._dense_t

    def scores(self, padded_w: np.ndarray, bias: float, rows: np.ndarray) -> np.ndarray:
        ids = self.slot_ids[rows]
        vals = self.slot_vals[rows]
        acc = vals[:, 0] * padded_w[ids[:, 0]]
        for s in range(1, ids.shape[1]):
            acc = acc + vals[:, s] * padded_w[ids[:, s]]
        return acc + bias


@dataclass
class Cluster:
    """A bottom-level bucket: representative plus sorted member ids."""

    id: int
    representative: CompressedVector
    item_ids: np.ndarray

    @property
    def size(self) -> int:
        return len(self.item_ids)

    @property
    def is_empty(self) -> bool:
        return self.size == 0


def _slot_norms(vals: np.ndarray) -> np.ndarray:
    acc = vals[:, 0] * vals[:, 0]
    for s in range(1, vals.shape[1]):
        acc = acc + vals[:, s] * vals[:, s]
    return acc


class ClusterIndex:
    """Immutable hierarchical index for one modality."""

    def __init__(self, modality: str, seed: int, levels: list[Level],
                 cluster_items: list[np.ndarray], n_items: int):
        if modality not in _MODALITY_CODES:
            raise ValueError(f"unknown modality {modality!r}")
        self.modality = modality
        self.seed = seed
        self.levels = levels
        self.cluster_items = cluster_items
        self.n_items = n_items
        self.cluster_sizes = np.array([len(ids) for ids in cluster_items], dtype=np.int64)
        self._cluster_slot_cache: dict[int, tuple[list, list]] = {}
        self._fert_cache: dict[int, list] = {}

    @property
    def levels_count(self) -> int:
        return len(self.levels)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_items)

    def cluster(self, cid: int) -> Cluster:
        bottom = self.levels[-1]
        return Cluster(
            id=cid,
            representative=CompressedVector.from_row(bottom.words[cid]),
            item_ids=self.cluster_items[cid],
        )

    def clusters(self) -> list[Cluster]:
        return [self.cluster(c) for c in range(self.n_clusters)]

    def non_empty_count(self) -> int:
        return int((self.cluster_sizes > 0).sum())

    # -- greedy descent ------------------------------------------------

    def _fertility(self, depth: int) -> list[np.ndarray]:
        # Cached on finished indexes; during construction the temporary
        # instance has no cache and masks are recomputed per stage.
        cache = getattr(self, "_fert_cache", None)
        if cache is not None and depth in cache:
            return cache[depth]
        fert = [None] * (depth + 1)
        fert[depth] = np.ones(len(self.levels[depth]), dtype=bool)
        for k in range(depth - 1, -1, -1):
            below = fert[k + 1]
            fert[k] = np.array(
                [len(ch) > 0 and bool(below[ch].any()) for ch in self.levels[k].children],
                dtype=bool,
            )
        if cache is not None:
            cache[depth] = fert
        return fert

    def _nearest(self, level: Level, cand: np.ndarray,
                 q_ids: np.ndarray, q_vals: np.ndarray, q_norms: np.ndarray) -> np.ndarray:
        """Index into `cand` of the nearest representative per query row."""
        dense_t = level.dense_t()[:, cand]
        cand_norms = level.norms[cand]
        out = np.empty(q_ids.shape[0], dtype=np.int64)
        for start in range(0, q_ids.shape[0], _CHUNK):
            ids = q_ids[start:start + _CHUNK]
            vals = q_vals[start:start + _CHUNK]
            acc = vals[:, 0][:, None] * dense_t[ids[:, 0]]
            for s in range(1, ids.shape[1]):
                acc = acc + vals[:, s][:, None] * dense_t[ids[:, s]]
            d2 = (q_norms[start:start + _CHUNK][:, None] + cand_norms[None, :]) - 2.0 * acc
            out[start:start + _CHUNK] = np.argmin(d2, axis=1)
        return out

    def _descend(self, q_ids: np.ndarray, q_vals: np.ndarray, depth: int) -> np.ndarray:
        """Greedy walk through levels 0..depth; returns chosen node per row."""
        q_norms = _slot_norms(q_vals)
        fert = self._fertility(depth)
        root_cand = np.flatnonzero(fert[0])
        chosen = root_cand[self._nearest(self.levels[0], root_cand, q_ids, q_vals, q_norms)]
        for k in range(1, depth + 1):
            nxt = np.empty(len(chosen), dtype=np.int64)
            for node in np.unique(chosen):
                rows = np.flatnonzero(chosen == node)
                kids = self.levels[k - 1].children[node]
                cand = kids[fert[k][kids]]
                if len(cand) == 1:
                    nxt[rows] = cand[0]
                else:
                    pos = self._nearest(self.levels[k], cand,
                                        q_ids[rows], q_vals[rows], q_norms[rows])
                    nxt[rows] = cand[pos]
            chosen = nxt
        return chosen

    def assign(self, item: CompressedVector) -> int:
        """Cluster id reached by greedy top-down descent for one vector."""
        ids, vals = unpack_slots(item.to_row())
        return int(self._descend(ids, vals, self.levels_count - 1)[0])

    def assign_all(self, vectors: ModalityVectors) -> np.ndarray:
        return self._descend(vectors.slot_ids, vectors.slot_vals, self.levels_count - 1)

    # -- cluster selection ----------------------------------------------

    def select_clusters(self, model, b: int, s_m: int | None = None) -> list[int]:
        """Up to b non-empty clusters by descending representative score.

        Representatives are scored with the model's hyperplane; at each
        internal level the top max(b, 1) nodes expand. Clusters larger
        than s_m or empty are never returned.
        """
        if b <= 0:
            return []
        padded = np.zeros(_ID_WIDTH, dtype=np.float64)
        w = np.asarray(model.weights, dtype=np.float64)
        padded[: len(w)] = w
        bias = float(model.bias)

        depth = self.levels_count - 1
        fert = self._fertility(depth)
        cand = np.flatnonzero(fert[0])
        for k in range(depth):
            scores = self.levels[k].scores(padded, bias, cand)
            keep = min(max(b, 1), len(cand))
            order = np.lexsort((cand, -scores))[:keep]
            nxt: list[np.ndarray] = []
            for node in cand[order]:
                kids = self.levels[k].children[node]
                nxt.append(kids[fert[k + 1][kids]])
            cand = np.unique(np.concatenate(nxt)) if nxt else np.empty(0, dtype=np.int64)

        sizes = self.cluster_sizes[cand]
        eligible = sizes >= 1
        if s_m is not None:
            eligible &= sizes <= s_m
        cand = cand[eligible]
        if len(cand) == 0:
            return []
        scores = self.levels[depth].scores(padded, bias, cand)
        order = np.lexsort((cand, -scores))
        return [int(c) for c in cand[order][:b]]

    def cluster_slot_lists(self, cid: int, vectors: ModalityVectors) -> tuple[list, list, list]:
        """(item ids, slot-id lists, slot-value lists) for one cluster."""
        cached = self._cluster_slot_cache.get(cid)
        if cached is None:
            ids_list, vals_list = vectors.slot_lists()
            members = self.cluster_items[cid].tolist()
            cached = (
                members,
                [ids_list[i] for i in members],
                [vals_list[i] for i in members],
            )
            self._cluster_slot_cache[cid] = cached
        return cached

    def warm_cluster_cache(self, vectors: ModalityVectors) -> None:
        """Materialize every cluster's member slot lists up front.

        One-time cost on the first retrieval; keeps per-item scan cost
        uniform across rounds instead of paying list slicing on first
        touch of each cluster.
        """
        if getattr(self, "_warmed", False):
            return
        for cid in range(self.n_clusters):
            self.cluster_slot_lists(cid, vectors)
        self._warmed = True


def create_index(vectors: ModalityVectors, seed: int, modality: str) -> ClusterIndex:
    """Build the index for one modality; same collection + seed => same index."""
    n = len(vectors)
    if n == 0:
        raise ValueError("empty collection")
    rng = np.random.default_rng(seed)

    chain: list[np.ndarray] = []
    current = np.arange(n, dtype=np.int64)
    while len(current) >= ROOT_CAP:
        k = max(1, len(current) // SAMPLE_RATE)
        pick = rng.choice(len(current), size=k, replace=False)
        current = np.sort(current[pick])
        chain.append(current)
    member_ids = list(reversed(chain)) if chain else [np.arange(n, dtype=np.int64)]

    levels: list[Level] = []
    idx = ClusterIndex.__new__(ClusterIndex)
    idx.levels = levels
    for k, ids_k in enumerate(member_ids):
        lvl = Level(words=vectors.words[ids_k].copy())
        lvl.children = [np.empty(0, dtype=np.int64) for _ in range(len(lvl))]
        if k > 0:
            parents = idx._descend(lvl.slot_ids, lvl.slot_vals, k - 1)
            buckets: dict[int, list[int]] = {}
            for node_i, p in enumerate(parents):
                buckets.setdefault(int(p), []).append(node_i)
            for p, kids in buckets.items():
                levels[k - 1].children[p] = np.array(kids, dtype=np.int64)
        levels.append(lvl)

    bottom_choice = idx._descend(vectors.slot_ids, vectors.slot_vals, len(levels) - 1)
    order = np.argsort(bottom_choice, kind="stable")
    sorted_choice = bottom_choice[order]
    bounds = np.searchsorted(sorted_choice, np.arange(len(levels[-1]) + 1))
    cluster_items = [
        np.sort(order[bounds[c]:bounds[c + 1]]).astype(np.int64)
        for c in range(len(levels[-1]))
    ]
    return ClusterIndex(modality=modality, seed=seed, levels=levels,
                        cluster_items=cluster_items, n_items=n)


def save_index(index: ClusterIndex, path) -> None:
    header = struct.pack("<4sIBIQQ", INDEX_MAGIC, INDEX_VERSION,
                         _MODALITY_CODES[index.modality], index.levels_count,
                         index.n_clusters, index.seed)
    parts = [header]
    for lvl in index.levels:
        parts.append(struct.pack("<Q", len(lvl)))
        parts.append(lvl.words.astype("<u8").tobytes())
    for ids in index.cluster_items:
        parts.append(struct.pack("<Q", len(ids)))
        parts.append(ids.astype("<u8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_index(path) -> ClusterIndex:
    with open(path, "rb") as fh:
        raw = fh.read()
    head = struct.Struct("<4sIBIQQ")
    if len(raw) < head.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, mod_code, n_levels, n_clusters, seed = head.unpack_from(raw)
    if magic != INDEX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != INDEX_VERSION:
        raise FormatError(f"{path}: unsupported index version {version}")
    if mod_code not in _MODALITY_NAMES:
        raise FormatError(f"{path}: unknown modality code {mod_code}")
    off = head.size

    levels: list[Level] = []
    for k in range(n_levels):
        if off + 8 > len(raw):
            raise FormatError(f"{path}: level {k} truncated")
        (count,) = struct.unpack_from("<Q", raw, off)
        off += 8
        nbytes = count * 24
        if off + nbytes > len(raw):
            raise FormatError(f"{path}: level {k} truncated")
        words = np.frombuffer(raw, dtype="<u8", count=count * 3, offset=off).reshape(count, 3).copy()
        off += nbytes
        lvl = Level(words=words)
        lvl.children = [np.empty(0, dtype=np.int64) for _ in range(count)]
        levels.append(lvl)
    if len(levels[-1]) != n_clusters:
        raise FormatError(f"{path}: bottom level has {len(levels[-1])} nodes, header says {n_clusters}")

    cluster_items: list[np.ndarray] = []
    total = 0
    for c in range(n_clusters):
        if off + 8 > len(raw):
            raise FormatError(f"{path}: cluster {c} truncated")
        (size,) = struct.unpack_from("<Q", raw, off)
        off += 8
        nbytes = size * 8
        if off + nbytes > len(raw):
            raise FormatError(f"{path}: cluster {c} truncated")
        ids = np.frombuffer(raw, dtype="<u8", count=size, offset=off).astype(np.int64)
        off += nbytes
        cluster_items.append(ids)
        total += size
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")

    # Item-coverage invariant: every id 0..N-1 in exactly one cluster.
    if total:
        merged = np.sort(np.concatenate(cluster_items))
        if merged[0] != 0 or merged[-1] != total - 1 or len(np.unique(merged)) != total:
            raise FormatError(f"{path}: cluster membership does not cover items exactly once")

    idx = ClusterIndex(modality=_MODALITY_NAMES[mod_code], seed=seed, levels=levels,
                       cluster_items=cluster_items, n_items=total)
    # Child edges are not stored: replay the deterministic attachment pass.
    for k in range(1, len(levels)):
        parents = idx._descend(levels[k].slot_ids, levels[k].slot_vals, k - 1)
        buckets: dict[int, list[int]] = {}
        for node_i, p in enumerate(parents):
            buckets.setdefault(int(p), []).append(node_i)
        for p, kids in buckets.items():
            levels[k - 1].children[p] = np.array(kids, dtype=np.int64)
    return idx
