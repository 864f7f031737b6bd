"""HTTP service exposing collections and interactive sessions.

Collections are ingested once (compress + index both modalities) and
persisted under the data directory; sessions live in memory and are
serialized per session id. Suggestions are pull-based: a GET runs the
next round only when feedback arrived since the last one, otherwise the
cached round is returned unchanged.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .features import MAX_DIM, compress_collection, compute_feature_stats
from .index import ClusterIndex, create_index, load_index, save_index
from .retrieval import RetrievalParams, RoundStats
from .session import Session, create_session, next_round, preseed, submit_feedback
from .storage import (
    DENSE_MAGIC,
    FORMAT_VERSION,
    Collection,
    FormatError,
    ModalityVectors,
    parse_dense,
    write_compressed,
)

DEFAULT_DATA_DIR = "exq-data"
MAX_K = 100

__all__ = ["create_app", "CollectionHandle"]


@dataclass
class CollectionHandle:
    """Disk-backed collection plus lazily loaded runtime state."""

    id: str
    n: int
    dims: dict
    seed: int
    content_hash: str
    root: Path
    thumbnail_template: str | None = None
    _collection: Collection | None = field(default=None, repr=False)
    _indexes: dict | None = field(default=None, repr=False)

    def manifest(self) -> dict:
        return {
            "id": self.id,
            "n": self.n,
            "dims": self.dims,
            "seed": self.seed,
            "content_hash": self.content_hash,
            "thumbnail_template": self.thumbnail_template,
        }

    def runtime(self) -> tuple[Collection, dict]:
        if self._collection is None:
            self._collection = Collection.load(self.root / "visual.exqc", self.root / "text.exqc")
            self._indexes = {
                "visual": load_index(self.root / "visual.exqi"),
                "text": load_index(self.root / "text.exqi"),
            }
        return self._collection, self._indexes


@dataclass
class SessionRuntime:
    session: Session
    collection_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    stats: list[RoundStats] = field(default_factory=list)
    cached_payload: dict | None = None
    feedback_pending: bool = True


class SessionCreate(BaseModel):
    collection_id: str
    seed: int = 0
    params: dict = {}
    preseed: dict | None = None


class FeedbackBody(BaseModel):
    relevant: list[int] = []
    not_relevant: list[int] = []


def _check_dense_header(raw: bytes, name: str) -> tuple[int, int]:
    head = struct.Struct("<4sIIQ")
    if len(raw) < head.size:
        raise HTTPException(400, f"{name}: truncated header")
    magic, version, dim, count = head.unpack_from(raw)
    if magic != DENSE_MAGIC:
        raise HTTPException(400, f"{name}: bad magic")
    if version != FORMAT_VERSION:
        raise HTTPException(400, f"{name}: unsupported version {version}")
    if dim > MAX_DIM:
        raise HTTPException(422, f"{name}: dimensionality exceeds id width")
    return dim, count


def create_app(data_dir=None) -> FastAPI:
    root = Path(data_dir or os.environ.get("EXQ_DATA_DIR", DEFAULT_DATA_DIR))
    root.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="exq", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    collections: dict[str, CollectionHandle] = {}
    by_hash: dict[str, str] = {}
    sessions: dict[str, SessionRuntime] = {}
    counter = {"session": 0}
    registry_lock = threading.Lock()

    for manifest_path in sorted(root.glob("*/manifest.json")):
        data = json.loads(manifest_path.read_text())
        handle = CollectionHandle(
            id=data["id"], n=data["n"], dims=data["dims"], seed=data["seed"],
            content_hash=data["content_hash"], root=manifest_path.parent,
            thumbnail_template=data.get("thumbnail_template"),
        )
        collections[handle.id] = handle
        by_hash[handle.content_hash] = handle.id

    def get_collection(cid: str) -> CollectionHandle:
        handle = collections.get(cid)
        if handle is None:
            raise HTTPException(404, f"unknown collection {cid}")
        return handle

    def get_session(sid: str) -> SessionRuntime:
        runtime = sessions.get(sid)
        if runtime is None:
            raise HTTPException(404, f"unknown session {sid}")
        return runtime

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/collections", status_code=201)
    def post_collection(visual: UploadFile = File(...), text: UploadFile = File(...),
                        seed: int = Form(0), thumbnail_template: str = Form(None)):
        raw_v = visual.file.read()
        raw_t = text.file.read()
        _check_dense_header(raw_v, "visual")
        _check_dense_header(raw_t, "text")
        digest = hashlib.sha256()
        digest.update(raw_v)
        digest.update(raw_t)
        digest.update(str(seed).encode())
        content_hash = digest.hexdigest()
        with registry_lock:
            if content_hash in by_hash:
                raise HTTPException(409, {"error": "duplicate collection",
                                          "id": by_hash[content_hash]})
        try:
            dense_v = parse_dense(raw_v, "visual")
            dense_t = parse_dense(raw_t, "text")
        except FormatError as exc:
            raise HTTPException(400, str(exc)) from exc
        if dense_v.shape[0] != dense_t.shape[0]:
            raise HTTPException(422, "modality count mismatch")

        cid = f"c{content_hash[:12]}"
        cdir = root / cid
        cdir.mkdir(parents=True, exist_ok=True)
        dims = {}
        handle_vectors = {}
        for name, dense in (("visual", dense_v), ("text", dense_t)):
            stats = compute_feature_stats(dense)
            words = compress_collection(dense, stats)
            vectors = ModalityVectors(dim=dense.shape[1], words=words)
            write_compressed(cdir / f"{name}.exqc", dense.shape[1], words)
            build_seed = seed if name == "visual" else seed + 1
            index = create_index(vectors, seed=build_seed, modality=name)
            save_index(index, cdir / f"{name}.exqi")
            dims[name] = dense.shape[1]
            handle_vectors[name] = (vectors, index)

        handle = CollectionHandle(
            id=cid, n=int(dense_v.shape[0]), dims=dims, seed=seed,
            content_hash=content_hash, root=cdir, thumbnail_template=thumbnail_template,
        )
        handle._collection = Collection(visual=handle_vectors["visual"][0],
                                        text=handle_vectors["text"][0])
        handle._indexes = {"visual": handle_vectors["visual"][1],
                           "text": handle_vectors["text"][1]}
        (cdir / "manifest.json").write_text(json.dumps(handle.manifest(), indent=2))
        with registry_lock:
            collections[cid] = handle
            by_hash[content_hash] = cid
        return handle.manifest()

    @app.get("/collections")
    def list_collections():
        return [collections[c].manifest() for c in sorted(collections)]

    @app.get("/collections/{cid}")
    def get_collection_info(cid: str):
        return get_collection(cid).manifest()

    @app.get("/collections/{cid}/features/{item_id}")
    def get_item_features(cid: str, item_id: int):
        handle = get_collection(cid)
        if not 0 <= item_id < handle.n:
            raise HTTPException(404, f"item {item_id} out of range")
        collection, _ = handle.runtime()
        out = {}
        for name in ("visual", "text"):
            vectors = collection.modality(name)
            ids_l, vals_l = vectors.slot_lists()
            out[name] = [[f, v] for f, v in zip(ids_l[item_id], vals_l[item_id]) if f != 1023]
        return out

    @app.post("/sessions", status_code=201)
    def post_session(body: SessionCreate):
        handle = get_collection(body.collection_id)
        try:
            params = RetrievalParams.from_dict(body.params) if body.params else RetrievalParams()
        except (ValueError, TypeError) as exc:
            raise HTTPException(422, str(exc)) from exc
        if params.k > MAX_K:
            raise HTTPException(422, f"k must be at most {MAX_K}")
        with registry_lock:
            counter["session"] += 1
            sid = f"s{counter['session']}"
        sess = create_session(params, seed=body.seed, session_id=sid)
        if body.preseed:
            pos = body.preseed.get("positives", [])
            neg = body.preseed.get("negatives", [])
            bad = [i for i in list(pos) + list(neg) if not 0 <= int(i) < handle.n]
            if bad:
                raise HTTPException(422, f"pre-seed ids out of range: {bad[:5]}")
            try:
                preseed(sess, pos, neg)
            except ValueError as exc:
                raise HTTPException(409, str(exc)) from exc
        sessions[sid] = SessionRuntime(session=sess, collection_id=body.collection_id)
        return {"id": sid, "collection_id": body.collection_id,
                "params": params.to_dict(), "seed": body.seed}

    @app.post("/sessions/{sid}/feedback", status_code=204)
    def post_feedback(sid: str, body: FeedbackBody):
        runtime = get_session(sid)
        handle = get_collection(runtime.collection_id)
        bad = [i for i in body.relevant + body.not_relevant if not 0 <= i < handle.n]
        if bad:
            raise HTTPException(422, f"ids out of range: {bad[:5]}")
        with runtime.lock:
            try:
                submit_feedback(runtime.session, body.relevant, body.not_relevant)
            except ValueError as exc:
                raise HTTPException(409, str(exc)) from exc
            # An explicitly submitted empty set is a "skip round": the next
            # suggestions call advances instead of replaying the cache.
            runtime.feedback_pending = True

    @app.patch("/sessions/{sid}/params")
    def patch_params(sid: str, body: dict):
        runtime = get_session(sid)
        with runtime.lock:
            merged = runtime.session.params.to_dict()
            merged.update({k: v for k, v in body.items() if k in merged})
            try:
                params = RetrievalParams.from_dict(merged)
            except (ValueError, TypeError) as exc:
                raise HTTPException(422, str(exc)) from exc
            if params.k > MAX_K:
                raise HTTPException(422, f"k must be at most {MAX_K}")
            # Applies from the next round; labels, seen set and the cached
            # current round are untouched.
            runtime.session.params = params
            return {"id": sid, "params": params.to_dict()}

    @app.get("/sessions/{sid}/suggestions")
    def get_suggestions(sid: str):
        runtime = get_session(sid)
        handle = get_collection(runtime.collection_id)
        with runtime.lock:
            if runtime.cached_payload is not None and not runtime.feedback_pending:
                return runtime.cached_payload
            collection, indexes = handle.runtime()
            try:
                suggestions, stats = next_round(runtime.session, collection, indexes)
            except ValueError as exc:
                raise HTTPException(409, str(exc)) from exc
            runtime.stats.append(stats)
            runtime.feedback_pending = False
            runtime.cached_payload = {
                "round": runtime.session.round,
                "items": [
                    {"id": c.item_id, "score_visual": c.score_visual,
                     "score_text": c.score_text, "avg_rank": c.avg_rank}
                    for c in suggestions
                ],
                "stats": stats.to_dict(),
            }
            return runtime.cached_payload

    @app.get("/sessions/{sid}/stats")
    def get_stats(sid: str):
        runtime = get_session(sid)
        with runtime.lock:
            return [s.to_dict() for s in runtime.stats]

    return app
