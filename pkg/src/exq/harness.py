"""Desk-scale evaluation harness: planted categories and scripted actors.

Synthetic collections plant each category on a private feature subset in
both modalities, on top of a low noise floor, so relevance sets are known
by construction. An optional block of identical "dead" vectors recreates
the one-giant-cluster skew seen in real collections. Artificial actors
pre-train on 100 category positives plus 200 random negatives, then run
feedback rounds labeling suggested category members as relevant.

Reported latency per round is the wall-clock of the suggestion pipeline
(cluster selection + scoring + fusion); training time is kept as its own
stat column since it does not vary with the search expansion.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import compress_collection, compute_feature_stats
from .index import ClusterIndex, create_index
from .retrieval import RetrievalParams, RoundStats
from .session import create_session, next_round, preseed, submit_feedback
from .storage import Collection, ModalityVectors, write_dense

DEFAULT_ROUNDS = 10
CSV_COLUMNS = ["config_id", "b", "S_m", "S_c", "w", "round",
               "precision", "latency_ms", "items_scored"]

__all__ = [
    "ActorProfile",
    "RunReport",
    "synth_dense",
    "generate_synthetic_collection",
    "build_collection",
    "make_actor",
    "run_actor",
    "sweep",
    "write_csv",
]


@dataclass(frozen=True)
class ActorProfile:
    """Scripted user with a planted relevance set."""

    category: int
    relevance_set: frozenset
    pretrain_positives: tuple
    pretrain_negatives: tuple


@dataclass
class RunReport:
    """Per-round precision/latency for one actor run."""

    precisions: list[float] = field(default_factory=list)
    latencies_ms: list[float] = field(default_factory=list)
    items_scored: list[int] = field(default_factory=list)
    stats: list[RoundStats] = field(default_factory=list)

    @property
    def mean_precision(self) -> float:
        return float(np.mean(self.precisions)) if self.precisions else 0.0

    @property
    def median_latency_ms(self) -> float:
        """Median over rounds 2+; the first round includes cache warm-up."""
        if not self.latencies_ms:
            return 0.0
        steady = self.latencies_ms[1:] if len(self.latencies_ms) > 1 else self.latencies_ms
        return float(np.median(steady))


def synth_dense(n: int, d_visual: int, d_text: int, n_categories: int,
                category_strength: float = 0.9, seed: int = 0,
                duplicate_fraction: float = 0.0):
    """Dense modality matrices plus the ground-truth map.

    Each category owns a disjoint feature subset per modality; members get
    elevated values on ~75% of it. Duplicates share one fixed vector in
    both modalities so they collapse into a single cluster after indexing.
    """
    if n_categories and n < n_categories * 200:
        raise ValueError("infeasible synthetic parameters: need N >= 200 per category")
    rng = np.random.default_rng(seed)
    dense_v = rng.random((n, d_visual)) ** 3 * 0.3
    dense_t = rng.random((n, d_text)) ** 3 * 0.3
    truth: dict = {"categories": {}, "duplicates": [], "category_features": {}}

    sub_v = max(3, d_visual // 25)
    sub_t = max(2, d_text // 12)
    feats_v = feats_t = None
    perm = rng.permutation(n)
    used = 0
    if n_categories:
        if n_categories * sub_v <= d_visual:
            feats_v = rng.choice(d_visual, size=n_categories * sub_v, replace=False).reshape(n_categories, sub_v)
        else:
            feats_v = np.stack([rng.choice(d_visual, size=sub_v, replace=False)
                                for _ in range(n_categories)])
        if n_categories * sub_t <= d_text:
            feats_t = rng.choice(d_text, size=n_categories * sub_t, replace=False).reshape(n_categories, sub_t)
        else:
            feats_t = np.stack([rng.choice(d_text, size=sub_t, replace=False)
                                for _ in range(n_categories)])
        members_per = n // (2 * n_categories)
        for c in range(n_categories):
            ids = np.sort(perm[used:used + members_per])
            used += members_per
            for dense, feats, width in ((dense_v, feats_v[c], sub_v), (dense_t, feats_t[c], sub_t)):
                active = rng.random((members_per, width)) < 0.75
                vals = category_strength * (0.7 + 0.3 * rng.random((members_per, width)))
                block = dense[np.ix_(ids, feats)]
                dense[np.ix_(ids, feats)] = np.where(active, vals, block)
            truth["categories"][str(c)] = [int(i) for i in ids]
            truth["category_features"][str(c)] = {
                "visual": [int(f) for f in feats_v[c]],
                "text": [int(f) for f in feats_t[c]],
            }

    if duplicate_fraction > 0.0:
        count = int(duplicate_fraction * n)
        if used + count > n:
            raise ValueError("infeasible synthetic parameters: duplicates overlap categories")
        dup_ids = np.sort(perm[used:used + count])
        # Mono-modal dead block: one shared placeholder that looks exactly
        # like a strong category-0 image but carries no text, like removed
        # images replaced by a common thumbnail. Visually inseparable from
        # genuine members, its giant cluster stays competitive for
        # selection; fusion still demotes the items on the empty text
        # side, so they cost scan time without polluting suggestions.
        dead_v = np.zeros(d_visual)
        if n_categories:
            dead_v[feats_v[0]] = category_strength
        dense_v[dup_ids] = dead_v
        dense_t[dup_ids] = 0.0
        truth["duplicates"] = [int(i) for i in dup_ids]

    return dense_v, dense_t, truth


def generate_synthetic_collection(out_dir, n: int, d_visual: int, d_text: int,
                                  n_categories: int, category_strength: float = 0.9,
                                  seed: int = 0, duplicate_fraction: float = 0.0) -> dict:
    """Write EXQD files plus the ground-truth JSON; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dense_v, dense_t, truth = synth_dense(n, d_visual, d_text, n_categories,
                                          category_strength, seed, duplicate_fraction)
    paths = {
        "visual": out / "visual.exqd",
        "text": out / "text.exqd",
        "truth": out / "truth.json",
    }
    write_dense(paths["visual"], dense_v)
    write_dense(paths["text"], dense_t)
    paths["truth"].write_text(json.dumps(truth))
    return {k: str(v) for k, v in paths.items()}


def build_collection(dense_v: np.ndarray, dense_t: np.ndarray,
                     seed: int = 0) -> tuple[Collection, dict[str, ClusterIndex]]:
    """Compress both modalities and build their indexes."""
    modalities = {}
    indexes = {}
    for name, dense, build_seed in (("visual", dense_v, seed), ("text", dense_t, seed + 1)):
        stats = compute_feature_stats(dense)
        vectors = ModalityVectors(dim=dense.shape[1], words=compress_collection(dense, stats))
        modalities[name] = vectors
        indexes[name] = create_index(vectors, seed=build_seed, modality=name)
    return Collection(visual=modalities["visual"], text=modalities["text"]), indexes


def make_actor(truth: dict, category: int, n_items: int, seed: int,
               n_positives: int = 100, n_negatives: int = 200) -> ActorProfile:
    """100 pre-train positives from the category, 200 random negatives."""
    relevance = np.array(truth["categories"][str(category)], dtype=np.int64)
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.choice(relevance, size=min(n_positives, len(relevance)), replace=False))
    pos_set = set(int(i) for i in pos)
    pool = np.array([i for i in range(n_items) if i not in pos_set], dtype=np.int64)
    neg = np.sort(rng.choice(pool, size=min(n_negatives, len(pool)), replace=False))
    return ActorProfile(
        category=category,
        relevance_set=frozenset(int(i) for i in relevance),
        pretrain_positives=tuple(int(i) for i in pos),
        pretrain_negatives=tuple(int(i) for i in neg),
    )


def run_actor(actor: ActorProfile, params: RetrievalParams, collection: Collection,
              indexes: dict[str, ClusterIndex], rounds: int = DEFAULT_ROUNDS,
              session_seed: int = 0, n_random_negatives: int = 100) -> RunReport:
    """Scripted feedback loop: suggested relevance-set members become positives."""
    sess = create_session(params, seed=session_seed)
    preseed(sess, actor.pretrain_positives, actor.pretrain_negatives)
    report = RunReport()
    for _ in range(rounds):
        suggestions, stats = next_round(sess, collection, indexes,
                                        n_random_negatives=n_random_negatives)
        ids = suggestions.ids()
        hits = [i for i in ids if i in actor.relevance_set]
        report.precisions.append(len(hits) / params.k)
        report.latencies_ms.append(stats.retrieve_ms)
        report.items_scored.append(stats.items_scored)
        report.stats.append(stats)
        submit_feedback(sess, hits, [])
    return report


def sweep(configs: list[RetrievalParams], collection: Collection,
          indexes: dict[str, ClusterIndex], actors: list[ActorProfile],
          rounds: int = DEFAULT_ROUNDS, session_seed: int = 0) -> list[dict]:
    """Cross-product run; one CSV row per (config, round), averaged over actors."""
    rows: list[dict] = []
    for i, params in enumerate(configs):
        reports = [
            run_actor(actor, params, collection, indexes, rounds=rounds,
                      session_seed=session_seed + j)
            for j, actor in enumerate(actors)
        ]
        for rnd in range(rounds):
            rows.append({
                "config_id": f"cfg{i:02d}",
                "b": params.b,
                "S_m": "" if params.s_m is None else params.s_m,
                "S_c": params.s_c,
                "w": params.w,
                "round": rnd + 1,
                "precision": float(np.mean([rep.precisions[rnd] for rep in reports])) if reports else 0.0,
                "latency_ms": float(np.mean([rep.latencies_ms[rnd] for rep in reports])) if reports else 0.0,
                "items_scored": int(np.mean([rep.items_scored[rnd] for rep in reports])) if reports else 0,
            })
    return rows


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
