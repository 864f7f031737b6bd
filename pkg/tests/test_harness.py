from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from exq import harness as H
from exq.figures import render_sweep_figures
from exq.retrieval import RetrievalParams
from exq.session import create_session, preseed, submit_feedback, train_round_models
from exq.storage import read_dense

from _oracles import full_scan_suggestions


# -- synthetic generator ---------------------------------------------------------

def test_generator_no_categories_pure_noise():
    dense_v, dense_t, truth = H.synth_dense(n=500, d_visual=16, d_text=8,
                                            n_categories=0, seed=1)
    assert truth["categories"] == {}
    assert dense_v.shape == (500, 16)
    assert dense_v.max() <= 0.3 + 1e-9


def test_generator_infeasible_params_rejected():
    with pytest.raises(ValueError, match="infeasible"):
        H.synth_dense(n=300, d_visual=16, d_text=8, n_categories=2, seed=1)


def test_generator_deterministic_files(tmp_path):
    a = H.generate_synthetic_collection(tmp_path / "a", n=600, d_visual=16,
                                        d_text=8, n_categories=2, seed=5)
    b = H.generate_synthetic_collection(tmp_path / "b", n=600, d_visual=16,
                                        d_text=8, n_categories=2, seed=5)
    for key in ("visual", "text", "truth"):
        with open(a[key], "rb") as fa, open(b[key], "rb") as fb:
            assert fa.read() == fb.read()
    dense = read_dense(a["visual"])
    assert dense.shape == (600, 16)
    truth = json.loads(open(a["truth"]).read())
    assert len(truth["categories"]) == 2


def test_generator_duplicates_form_one_giant_cluster():
    dense_v, dense_t, truth = H.synth_dense(n=4_000, d_visual=32, d_text=12,
                                            n_categories=2, seed=9,
                                            duplicate_fraction=0.1)
    dups = truth["duplicates"]
    assert len(dups) == 400
    collection, indexes = H.build_collection(dense_v, dense_t, seed=9)
    for name in ("visual", "text"):
        idx = indexes[name]
        member_of = {}
        for cid, ids in enumerate(idx.cluster_items):
            for i in ids:
                member_of[int(i)] = cid
        homes = {member_of[i] for i in dups}
        assert len(homes) == 1
        assert idx.cluster_sizes[homes.pop()] >= len(dups)


# -- actors -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_setup():
    dense_v, dense_t, truth = H.synth_dense(n=6_000, d_visual=48, d_text=16,
                                            n_categories=3, seed=21)
    collection, indexes = H.build_collection(dense_v, dense_t, seed=21)
    return collection, indexes, truth


def test_actor_profile_shape(bench_setup):
    _, _, truth = bench_setup
    actor = H.make_actor(truth, category=0, n_items=6_000, seed=2)
    assert set(actor.pretrain_positives) <= actor.relevance_set
    assert not (set(actor.pretrain_positives) & set(actor.pretrain_negatives))
    assert len(actor.pretrain_positives) == 100
    assert len(actor.pretrain_negatives) == 200


def test_actor_with_universal_relevance_has_precision_one(bench_setup):
    collection, indexes, truth = bench_setup
    n = len(collection)
    actor = H.ActorProfile(category=-1, relevance_set=frozenset(range(n)),
                           pretrain_positives=tuple(range(0, 100)),
                           pretrain_negatives=tuple(range(100, 300)))
    params = RetrievalParams(k=10, r=30, b=8)
    report = H.run_actor(actor, params, collection, indexes, rounds=3, session_seed=0)
    assert report.precisions == [1.0, 1.0, 1.0]


def test_run_actor_reports_all_rounds(bench_setup):
    collection, indexes, truth = bench_setup
    actor = H.make_actor(truth, category=1, n_items=6_000, seed=3)
    params = RetrievalParams(k=10, r=30, b=8)
    report = H.run_actor(actor, params, collection, indexes, rounds=5, session_seed=1)
    assert len(report.precisions) == 5
    assert len(report.latencies_ms) == 5
    assert all(0.0 <= p <= 1.0 for p in report.precisions)
    assert report.mean_precision > 0.3  # planted categories are easy


def test_full_scan_precision_matches_oracle_protocol(bench_setup):
    """Engine rounds at b=all equal a hand-rolled full-scan actor loop."""
    collection, indexes, truth = bench_setup
    b_all = max(indexes["visual"].non_empty_count(), indexes["text"].non_empty_count())
    params = RetrievalParams(k=10, r=30, b=b_all, s_c=1)
    actor = H.make_actor(truth, category=0, n_items=6_000, seed=4)

    engine = H.run_actor(actor, params, collection, indexes, rounds=4, session_seed=9)

    sess = create_session(params, seed=9)
    preseed(sess, actor.pretrain_positives, actor.pretrain_negatives)
    oracle_precisions = []
    for _ in range(4):
        models = train_round_models(sess, collection)
        sess.models = models
        expected = full_scan_suggestions(collection, models, sess.seen, params.k, params.r)
        ids = [i for i, _, _, _ in expected]
        sess.seen.update(ids)
        sess.round += 1
        hits = [i for i in ids if i in actor.relevance_set]
        oracle_precisions.append(len(hits) / params.k)
        submit_feedback(sess, hits, [])
    assert engine.precisions == oracle_precisions


# -- sweep / report ---------------------------------------------------------------------

def test_sweep_rows_and_csv(bench_setup, tmp_path):
    collection, indexes, truth = bench_setup
    actors = [H.make_actor(truth, c, 6_000, seed=30 + c) for c in range(2)]
    configs = [RetrievalParams(k=10, r=30, b=b) for b in (2, 8, 16)]
    rows = H.sweep(configs, collection, indexes, actors, rounds=10, session_seed=3)
    assert len(rows) == 30
    path = tmp_path / "sweep.csv"
    H.write_csv(rows, path)
    with open(path) as fh:
        parsed = list(csv.DictReader(fh))
    assert len(parsed) == 30
    assert list(parsed[0]) == H.CSV_COLUMNS
    assert {row["config_id"] for row in parsed} == {"cfg00", "cfg01", "cfg02"}


def test_sweep_empty_grid_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    H.write_csv(H.sweep([], None, None, [], rounds=10), path)
    with open(path) as fh:
        lines = fh.read().strip().splitlines()
    assert lines == [",".join(H.CSV_COLUMNS)]


def test_sweep_deterministic(bench_setup):
    collection, indexes, truth = bench_setup
    actors = [H.make_actor(truth, 0, 6_000, seed=40)]
    configs = [RetrievalParams(k=10, r=30, b=4)]
    a = H.sweep(configs, collection, indexes, actors, rounds=3, session_seed=5)
    b = H.sweep(configs, collection, indexes, actors, rounds=3, session_seed=5)
    for ra, rb in zip(a, b):
        assert ra["precision"] == rb["precision"]
        assert ra["items_scored"] == rb["items_scored"]


def test_figures_rendered(bench_setup, tmp_path):
    collection, indexes, truth = bench_setup
    actors = [H.make_actor(truth, 0, 6_000, seed=50)]
    configs = [RetrievalParams(k=10, r=30, b=b) for b in (2, 8)]
    rows = H.sweep(configs, collection, indexes, actors, rounds=3, session_seed=6)
    written = render_sweep_figures(rows, tmp_path)
    assert len(written) == 3
    for path in written:
        assert (tmp_path / path.split("/")[-1]).stat().st_size > 1_000


def test_worker_sweep_identical_precision(bench_setup):
    collection, indexes, truth = bench_setup
    actor = H.make_actor(truth, category=2, n_items=6_000, seed=60)
    baseline = None
    for w in (1, 2, 4):
        params = RetrievalParams(k=10, r=30, b=8, w=w, s_c=4)
        report = H.run_actor(actor, params, collection, indexes, rounds=5, session_seed=8)
        if baseline is None:
            baseline = report.precisions
        else:
            assert report.precisions == baseline, f"w={w} changed precision"
