"""Interactive loop state: labels, seen items, per-round retraining.

Each round retrains the per-modality hyperplanes from scratch on the
positives versus the explicit negatives plus a fresh draw of random
transient negatives, then retrieves suggestions and marks them seen.
Everything is a pure function of (collection, seed, feedback script).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .features import SENTINEL_ID
from .learner import DEFAULT_C, LinearModel, train_rows
from .retrieval import RetrievalParams, RoundStats, SuggestionList, retrieve
from .storage import MODALITIES, Collection

DEFAULT_RANDOM_NEGATIVES = 100

__all__ = [
    "Session",
    "create_session",
    "preseed",
    "submit_feedback",
    "train_round_models",
    "next_round",
    "to_snapshot",
    "from_snapshot",
]


@dataclass
class Session:
    id: str
    params: RetrievalParams
    rng_seed: int
    positives: set[int] = field(default_factory=set)
    negatives: set[int] = field(default_factory=set)
    seen: set[int] = field(default_factory=set)
    round: int = 0
    models: dict[str, LinearModel] = field(default_factory=dict)


def create_session(params: RetrievalParams, seed: int, session_id: str = "") -> Session:
    """Fresh session; parameter validation happens in RetrievalParams."""
    return Session(id=session_id or f"session-{seed}", params=params, rng_seed=seed)


def preseed(session: Session, positives, negatives) -> None:
    """Inject initial labels by id, e.g. a pre-trained actor profile.

    Pre-seeded ids count as already judged and are marked seen, so they
    are never suggested back.
    """
    pos = set(int(i) for i in positives)
    neg = set(int(i) for i in negatives)
    if pos & neg:
        raise ValueError("conflicting label")
    session.positives |= pos
    session.negatives |= neg
    session.seen |= pos | neg


def submit_feedback(session: Session, relevant, not_relevant) -> None:
    """Record round feedback; the latest label for an id wins."""
    rel = set(int(i) for i in relevant)
    not_rel = set(int(i) for i in not_relevant)
    if rel & not_rel:
        raise ValueError("conflicting label")
    session.positives -= not_rel
    session.negatives -= rel
    session.positives |= rel
    session.negatives |= not_rel


def _draw_transient_negatives(session: Session, n_items: int, n_random: int) -> list[int]:
    """Uniform draw without replacement from unlabeled, unseen ids."""
    blocked = session.positives | session.negatives | session.seen
    mask = np.ones(n_items, dtype=bool)
    for i in blocked:
        if 0 <= i < n_items:
            mask[i] = False
    pool = np.flatnonzero(mask)
    if len(pool) == 0:
        return []
    take = min(n_random, len(pool))
    rng = np.random.default_rng([session.rng_seed, session.round])
    return [int(i) for i in rng.choice(pool, size=take, replace=False)]


def train_round_models(session: Session, collection: Collection,
                       n_random_negatives: int = DEFAULT_RANDOM_NEGATIVES,
                       c: float = DEFAULT_C) -> dict[str, LinearModel]:
    """Train this round's per-modality models from the current labels."""
    if not session.positives:
        raise ValueError("cold session")
    transients = _draw_transient_negatives(session, len(collection), n_random_negatives)
    pos_ids = sorted(session.positives)
    neg_ids = sorted(session.negatives) + transients
    if not neg_ids:
        raise ValueError("need both classes")

    models: dict[str, LinearModel] = {}
    for name in MODALITIES:
        vectors = collection.modality(name)
        ids_l, vals_l = vectors.slot_lists()
        pos_rows = [_sparse_row(ids_l[i], vals_l[i]) for i in pos_ids]
        neg_rows = [_sparse_row(ids_l[i], vals_l[i]) for i in neg_ids]
        models[name] = train_rows(pos_rows, neg_rows, dim=vectors.dim, c=c)
    return models


def _sparse_row(fids, fvals) -> list[tuple[int, float]]:
    return [(f, v) for f, v in zip(fids, fvals) if f != SENTINEL_ID]


def next_round(session: Session, collection: Collection, indexes: dict,
               n_random_negatives: int = DEFAULT_RANDOM_NEGATIVES) -> tuple[SuggestionList, RoundStats]:
    """Retrain, retrieve, mark suggestions seen, advance the round counter."""
    t0 = time.perf_counter()
    session.models = train_round_models(session, collection, n_random_negatives)
    train_ms = (time.perf_counter() - t0) * 1000.0

    suggestions, stats = retrieve(session, session.params,
                                  indexes["visual"], indexes["text"], collection)
    session.seen.update(suggestions.ids())
    session.round += 1
    stats.round = session.round
    stats.train_ms = train_ms
    return suggestions, stats


def to_snapshot(session: Session) -> dict:
    """JSON-safe state sufficient to replay the session."""
    return {
        "id": session.id,
        "params": session.params.to_dict(),
        "seed": session.rng_seed,
        "positives": sorted(session.positives),
        "negatives": sorted(session.negatives),
        "seen": sorted(session.seen),
        "round": session.round,
    }


def from_snapshot(data: dict) -> Session:
    sess = Session(
        id=data["id"],
        params=RetrievalParams.from_dict(data["params"]),
        rng_seed=int(data["seed"]),
        positives=set(int(i) for i in data["positives"]),
        negatives=set(int(i) for i in data["negatives"]),
        seen=set(int(i) for i in data["seen"]),
        round=int(data["round"]),
    )
    return sess


def snapshot_json(session: Session) -> str:
    return json.dumps(to_snapshot(session), sort_keys=True)
