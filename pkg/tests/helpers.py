"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from hapflow.config import RunConfig
from hapflow.similarity import (
    METRIC_NEG_SQ_EUCLIDEAN,
    PointSet,
    PreferenceStrategy,
    similarity_from_points,
)
from hapflow.tensors import SimilarityTensor


def blob_points(rng, centers, per, sigma=0.1) -> PointSet:
    """Labelled gaussian blobs around the given centers."""
    pts = []
    labels = []
    for ci, ctr in enumerate(centers):
        pts.append(rng.normal(loc=ctr, scale=sigma, size=(per, len(ctr))))
        labels.extend([f"b{ci}"] * per)
    return PointSet(np.concatenate(pts), labels)


def random_similarity(n, levels, seed, lo=-40.0) -> SimilarityTensor:
    """Dense random nonpositive similarity, random negative diagonal."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(lo, 0.0, size=(n, n))
    np.fill_diagonal(base, rng.uniform(lo, 0.0, size=n))
    return SimilarityTensor.from_matrix(base, levels)


def blob_instance(idx) -> tuple[SimilarityTensor, RunConfig]:
    """Seeded cluster-shaped instance: N in 4..64, L in 1..3, k in 5..30."""
    rng = np.random.default_rng(1000 + idx)
    n = int(rng.integers(4, 65))
    levels = int(rng.integers(1, 4))
    iterations = int(rng.integers(5, 31))
    n_blobs = int(rng.integers(2, 5))
    centers = rng.uniform(-40.0, 40.0, size=(n_blobs, 2))
    which = rng.integers(0, n_blobs, size=n)
    pts = centers[which] + rng.normal(scale=0.8, size=(n, 2))
    pref = PreferenceStrategy.parse("random:-300:0")
    s = similarity_from_points(
        PointSet(pts), METRIC_NEG_SQ_EUCLIDEAN, levels, pref, seed=idx
    )
    cfg = RunConfig(levels=levels, iterations=iterations, damping=0.5, seed=idx)
    return s, cfg
