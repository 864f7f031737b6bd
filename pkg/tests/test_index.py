from __future__ import annotations

import numpy as np
import pytest

from exq import features as F
from exq import index as IX
from exq.learner import LinearModel
from exq.storage import ModalityVectors

from _oracles import greedy_assign


def build_vectors(n, dim, seed, planted=None):
    rng = np.random.default_rng(seed)
    dense = rng.random((n, dim)) ** 2
    if planted:
        for rows, cols, value in planted:
            dense[np.ix_(rows, cols)] = value
    stats = F.compute_feature_stats(dense)
    return ModalityVectors(dim=dim, words=F.compress_collection(dense, stats))


def zero_model(dim):
    return LinearModel(weights=np.zeros(dim), bias=0.0)


# -- create_index -----------------------------------------------------------

def test_base_case_small_collection():
    vecs = build_vectors(50, 16, seed=0)
    idx = IX.create_index(vecs, seed=1, modality="visual")
    # The 50 items become the bottom representatives themselves.
    assert idx.levels_count == 1
    assert idx.n_clusters == 50
    assert idx.cluster_sizes.sum() == 50


def test_ten_thousand_items_level_shape():
    vecs = build_vectors(10_000, 24, seed=2)
    idx = IX.create_index(vecs, seed=3, modality="visual")
    assert [len(lvl) for lvl in idx.levels] == [1, 100]
    assert idx.n_clusters == 100
    assert idx.cluster_sizes.sum() == 10_000
    assert idx.cluster_sizes.mean() == pytest.approx(100.0)


def test_coverage_every_item_exactly_once():
    vecs = build_vectors(3_000, 16, seed=4)
    idx = IX.create_index(vecs, seed=5, modality="text")
    merged = np.sort(np.concatenate(idx.cluster_items))
    assert np.array_equal(merged, np.arange(3_000))


def test_duplicates_collapse_into_one_cluster():
    n = 5_000
    rng = np.random.default_rng(6)
    dense = rng.random((n, 16)) ** 2
    dup_ids = np.arange(1_000, 2_500)
    dead = np.zeros(16)
    dead[3] = 0.9
    dead[11] = 0.6
    dense[dup_ids] = dead
    stats = F.compute_feature_stats(dense)
    vecs = ModalityVectors(dim=16, words=F.compress_collection(dense, stats))
    idx = IX.create_index(vecs, seed=7, modality="visual")
    homes = {idx.assign(F.CompressedVector.from_row(vecs.words[i])) for i in dup_ids[:50]}
    assert len(homes) == 1
    giant = homes.pop()
    assert idx.cluster_sizes[giant] >= len(dup_ids)


def test_build_determinism_same_seed():
    vecs = build_vectors(2_000, 16, seed=8)
    a = IX.create_index(vecs, seed=9, modality="visual")
    b = IX.create_index(vecs, seed=9, modality="visual")
    assert all(np.array_equal(x.words, y.words) for x, y in zip(a.levels, b.levels))
    assert all(np.array_equal(x, y) for x, y in zip(a.cluster_items, b.cluster_items))
    c = IX.create_index(vecs, seed=10, modality="visual")
    assert not all(np.array_equal(x.words, y.words) for x, y in zip(a.levels, c.levels))


# -- assign -------------------------------------------------------------------

def test_assign_bottom_representative_reaches_own_cluster():
    vecs = build_vectors(600, 16, seed=11)
    idx = IX.create_index(vecs, seed=12, modality="visual")
    # Representatives with a unique vector land in their own cluster.
    for cid in range(0, idx.n_clusters, 2):
        rep = F.CompressedVector.from_row(idx.levels[-1].words[cid])
        got = idx.assign(rep)
        same = [c for c in range(idx.n_clusters)
                if np.array_equal(idx.levels[-1].words[c], rep.to_row())]
        assert got == min(same)


def test_assign_matches_greedy_oracle():
    vecs = build_vectors(4_000, 20, seed=13)
    idx = IX.create_index(vecs, seed=14, modality="visual")
    rng = np.random.default_rng(15)
    for i in rng.integers(0, 4_000, size=60):
        cv = F.CompressedVector.from_row(vecs.words[i])
        assert idx.assign(cv) == greedy_assign(idx, F.decompress(cv))


def test_assign_tie_breaks_to_lower_id():
    # Two identical representatives: force by duplicating every vector.
    rng = np.random.default_rng(16)
    dense = np.repeat(rng.random((30, 12)) ** 2, 2, axis=0)
    stats = F.compute_feature_stats(dense)
    vecs = ModalityVectors(dim=12, words=F.compress_collection(dense, stats))
    idx = IX.create_index(vecs, seed=17, modality="visual")
    for i in range(0, 60, 7):
        cv = F.CompressedVector.from_row(vecs.words[i])
        got = idx.assign(cv)
        zero_dist = [c for c in range(idx.n_clusters)
                     if np.array_equal(idx.levels[-1].words[c], cv.to_row())]
        if zero_dist:
            assert got == min(zero_dist)


# -- select_clusters ------------------------------------------------------------

@pytest.fixture(scope="module")
def built():
    vecs = build_vectors(6_000, 24, seed=18,
                         planted=[(list(range(500)), [1, 2, 3], 0.9)])
    idx = IX.create_index(vecs, seed=19, modality="visual")
    return vecs, idx


def test_select_returns_all_eligible_when_b_large(built):
    _, idx = built
    model = LinearModel(weights=np.linspace(-1, 1, 24), bias=0.1)
    got = idx.select_clusters(model, b=idx.n_clusters + 10, s_m=None)
    assert len(got) == idx.non_empty_count()
    padded = np.zeros(1024)
    padded[:24] = model.weights
    scores = idx.levels[-1].scores(padded, model.bias, np.array(got))
    assert all(scores[i] >= scores[i + 1] for i in range(len(scores) - 1))


def test_select_zero_model_orders_by_id(built):
    _, idx = built
    got = idx.select_clusters(zero_model(24), b=5, s_m=None)
    eligible = [c for c in range(idx.n_clusters) if idx.cluster_sizes[c] >= 1]
    assert got == eligible[:5]


def test_select_s_m_excludes_large_clusters(built):
    _, idx = built
    model = LinearModel(weights=np.ones(24), bias=0.0)
    got = idx.select_clusters(model, b=idx.n_clusters, s_m=1)
    assert all(idx.cluster_sizes[c] == 1 for c in got)
    got2 = idx.select_clusters(model, b=idx.n_clusters, s_m=10 ** 9)
    assert len(got2) == idx.non_empty_count()


def test_select_b_zero_empty(built):
    _, idx = built
    assert idx.select_clusters(zero_model(24), b=0) == []


def test_expansion_soundness_returns_every_non_empty_cluster(built):
    _, idx = built
    model = LinearModel(weights=np.linspace(0, 1, 24), bias=-0.3)
    got = idx.select_clusters(model, b=idx.non_empty_count(), s_m=None)
    expected = {c for c in range(idx.n_clusters) if idx.cluster_sizes[c] >= 1}
    assert set(got) == expected


def test_selection_prefix_property_monotone_coverage(built):
    _, idx = built
    model = LinearModel(weights=np.linspace(1, -1, 24), bias=0.0)
    b_small = idx.select_clusters(model, b=4, s_m=None)
    b_large = idx.select_clusters(model, b=16, s_m=None)
    assert b_large[: len(b_small)] == b_small


# -- save / load ------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    vecs = build_vectors(2_500, 16, seed=20)
    idx = IX.create_index(vecs, seed=21, modality="text")
    path = tmp_path / "t.exqi"
    IX.save_index(idx, path)
    back = IX.load_index(path)
    assert back.modality == "text"
    assert back.seed == 21
    assert back.levels_count == idx.levels_count
    assert all(np.array_equal(a.words, b.words) for a, b in zip(idx.levels, back.levels))
    assert all(np.array_equal(a, b) for a, b in zip(idx.cluster_items, back.cluster_items))
    for la, lb in zip(idx.levels, back.levels):
        assert all(np.array_equal(x, y) for x, y in zip(la.children, lb.children))


def test_load_truncated_file(tmp_path):
    vecs = build_vectors(500, 16, seed=22)
    idx = IX.create_index(vecs, seed=23, modality="visual")
    path = tmp_path / "v.exqi"
    IX.save_index(idx, path)
    path.write_bytes(path.read_bytes()[:-20])
    with pytest.raises(Exception, match="truncated"):
        IX.load_index(path)


def test_load_version_mismatch(tmp_path):
    vecs = build_vectors(500, 16, seed=24)
    idx = IX.create_index(vecs, seed=25, modality="visual")
    path = tmp_path / "v.exqi"
    IX.save_index(idx, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99  # little-endian version field
    path.write_bytes(bytes(raw))
    with pytest.raises(Exception, match="unsupported index version"):
        IX.load_index(path)


def test_load_bad_coverage(tmp_path):
    vecs = build_vectors(500, 16, seed=26)
    idx = IX.create_index(vecs, seed=27, modality="visual")
    # Corrupt one cluster membership id to duplicate another.
    idx.cluster_items[0] = idx.cluster_items[0].copy()
    if len(idx.cluster_items[0]) >= 2:
        idx.cluster_items[0][0] = idx.cluster_items[0][1]
    path = tmp_path / "v.exqi"
    IX.save_index(idx, path)
    with pytest.raises(Exception, match="cover"):
        IX.load_index(path)


def test_clusters_are_sorted_and_sized():
    vecs = build_vectors(1_200, 16, seed=28)
    idx = IX.create_index(vecs, seed=29, modality="visual")
    for cluster in idx.clusters():
        assert np.all(np.diff(cluster.item_ids) > 0) or cluster.size <= 1
        assert cluster.size == len(cluster.item_ids)
        assert cluster.is_empty == (cluster.size == 0)
