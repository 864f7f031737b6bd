from __future__ import annotations

import numpy as np
import pytest

from exq.harness import build_collection, synth_dense


@pytest.fixture(scope="session")
def small_setup():
    """10k-item planted-category collection shared across pipeline tests."""
    dense_v, dense_t, truth = synth_dense(
        n=10_000, d_visual=64, d_text=24, n_categories=4,
        category_strength=0.9, seed=11,
    )
    collection, indexes = build_collection(dense_v, dense_t, seed=11)
    return collection, indexes, truth


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
