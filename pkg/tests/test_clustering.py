"""Unit tests for block scoring and community estimation."""

import itertools
import json
import math

import numpy as np
import pytest

from ksbm import clustering


def _block_matrix(labels, diag=1.0, off=0.0, noise=0.0, seed=0):
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    B = np.where(labels[:, None] == labels[None, :], diag, off).astype(float)
    if noise:
        B = B + noise * rng.standard_normal(B.shape)
    return B


def _brute_h(B, labels):
    groups = [np.flatnonzero(labels == r) for r in np.unique(labels)]
    n = len(groups)
    total = 0.0
    for gr in groups:
        for gs in groups:
            entries = [B[i, j] for i in gr for j in gs]
            mean = sum(entries) / len(entries)
            total += sum((e - mean) ** 2 for e in entries) / len(entries)
    return total / n ** 2


def _brute_d(B, labels):
    groups = [np.flatnonzero(labels == r) for r in np.unique(labels)]
    n = len(groups)
    means = {}
    for r, gr in enumerate(groups):
        for s, gs in enumerate(groups):
            entries = [B[i, j] for i in gr for j in gs]
            means[(r, s)] = sum(entries) / len(entries)
    total = 0.0
    for r in range(n):
        for s in range(n):
            total += (means[(r, s)] - means[(r, r)]) ** 2
            total += (means[(r, s)] - means[(s, s)]) ** 2
    return total / n ** 2


def test_hdg_brute_force_equivalence():
    rng = np.random.default_rng(1)
    for trial in range(5):
        N = rng.integers(4, 9)
        B = rng.standard_normal((N, N))
        labels = rng.integers(0, 3, size=N)
        if np.unique(labels).size < 2:
            labels[0] = labels[0] + 1
        h = clustering.homogeneity(B, labels)
        d = clustering.discriminativity(B, labels)
        assert h == pytest.approx(_brute_h(B, labels), abs=1e-12)
        assert d == pytest.approx(_brute_d(B, labels), abs=1e-12)
        score = clustering.block_clustering(B, labels)
        assert score.g == pytest.approx(d / h, rel=1e-12)


def test_block_clustering_edge_cases():
    labels = np.array([0, 0, 1, 1])
    constant = np.full((4, 4), 2.5)
    score = clustering.block_clustering(constant, labels)
    assert score.g == 0.0 and not score.infinite
    # homogeneous blocks with distinct means: infinite-score sentinel
    sharp = _block_matrix(labels, diag=1.0, off=0.0)
    score = clustering.block_clustering(sharp, labels)
    assert score.infinite and math.isinf(score.g)
    # stabilizer makes it finite
    score = clustering.block_clustering(sharp, labels, stabilizer=0.1)
    assert math.isfinite(score.g)
    with pytest.raises(ValueError):
        clustering.block_clustering(sharp, labels, stabilizer=-1.0)


def test_tensor_metrics_reduce_to_matrix_metrics():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((6, 6))
    labels = np.array([0, 0, 1, 1, 2, 2])
    mat = clustering.block_clustering(B, labels)
    ten = clustering.tensor_block_metrics(B, labels)
    assert ten.h == pytest.approx(mat.h, rel=1e-12)
    assert ten.d == pytest.approx(mat.d, rel=1e-12)
    assert ten.g == pytest.approx(mat.g, rel=1e-12)


def test_tensor_metrics_order3_brute_force():
    rng = np.random.default_rng(3)
    N = 4
    B = rng.standard_normal((N, N, N))
    labels = np.array([0, 0, 1, 1])
    groups = [np.flatnonzero(labels == r) for r in np.unique(labels)]
    n = len(groups)
    means = {}
    h = 0.0
    for multi in itertools.product(range(n), repeat=3):
        entries = [B[i, j, k] for i in groups[multi[0]]
                   for j in groups[multi[1]] for k in groups[multi[2]]]
        mean = sum(entries) / len(entries)
        means[multi] = mean
        h += sum((e - mean) ** 2 for e in entries) / len(entries)
    d = 0.0
    for multi, mean in means.items():
        for r in multi:
            d += (mean - means[(r, r, r)]) ** 2
    h /= n ** 3
    d /= n ** 3
    score = clustering.tensor_block_metrics(B, labels)
    assert score.h == pytest.approx(h, abs=1e-12)
    assert score.d == pytest.approx(d, abs=1e-12)


def test_representative_vectors_modes():
    B = np.arange(9.0).reshape(3, 3)
    rowcol = clustering.representative_vectors(B, "rowcol")
    assert rowcol.shape == (3, 6)
    assert np.array_equal(rowcol[1], np.concatenate([B[1], B[:, 1]]))
    col = clustering.representative_vectors(B, "column")
    assert np.array_equal(col[2], B[:, 2])
    with pytest.raises(ValueError):
        clustering.representative_vectors(B, "diag")
    T = np.arange(8.0).reshape(2, 2, 2)
    vecs = clustering.representative_vectors(T)
    assert vecs.shape == (2, 12)


def test_distance_matrix_symmetric_zero_diagonal():
    B = np.random.default_rng(4).standard_normal((5, 5))
    D = clustering.distance_matrix(B)
    assert np.allclose(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert np.all(D >= 0)


def test_sce_recovers_planted_blocks():
    labels = np.repeat([0, 1, 2], 5)
    B = _block_matrix(labels, diag=1.0, off=0.0, noise=0.05, seed=5)
    est = clustering.sce(B)
    assert clustering.agreement(labels, est.labels) == 1.0
    assert est.n_communities == 3
    # normalized-score trace is strictly increasing
    assert all(b > a for a, b in zip(est.trace, est.trace[1:]))


def test_sce_single_community_on_structureless_input():
    B = np.full((6, 6), 3.0)
    est = clustering.sce(B)
    assert est.n_communities <= 2
    with pytest.raises(ValueError):
        clustering.sce(np.zeros((1, 1)))


def test_sce_respects_max_communities():
    labels = np.repeat([0, 1, 2, 3], 4)
    B = _block_matrix(labels, diag=1.0, off=0.0, noise=0.05, seed=6)
    est = clustering.sce(B, max_communities=2)
    assert est.n_communities <= 2


def test_prune_merges_most_similar_communities():
    labels = np.repeat([0, 1, 2], 4)
    B = _block_matrix(labels, diag=1.0, off=0.0, noise=0.02, seed=7)
    # make communities 1 and 2 nearly identical so they merge first
    B[4:, 4:] = 1.0 + 0.02 * np.random.default_rng(8).standard_normal((8, 8))
    est = clustering.sce(B)
    D = clustering.distance_matrix(B)
    pruned = clustering.prune(est, D, 2, B)
    assert np.unique(pruned.labels).size == 2
    coarse = np.repeat([0, 1], [4, 8])
    assert clustering.agreement(coarse, pruned.labels) == 1.0
    with pytest.raises(ValueError):
        clustering.prune(est, D, 0)


def test_agreement_boundaries():
    truth = np.repeat([0, 1, 2], 10)
    assert clustering.agreement(truth, truth) == 1.0
    # label permutation does not matter
    assert clustering.agreement(truth, (truth + 1) % 3) == 1.0
    # full oversplit: one matched node per true community
    singletons = np.arange(truth.size)
    assert clustering.agreement(truth, singletons) == pytest.approx(3 / 30)
    # random labels sit near 1/n (optimal matching biases upward at small N,
    # so use a large sample to tighten the Monte-Carlo band)
    big = np.repeat([0, 1, 2], 300)
    rng = np.random.default_rng(9)
    vals = [clustering.agreement(big, rng.integers(0, 3, big.size))
            for _ in range(100)]
    assert abs(np.mean(vals) - 1 / 3) < 0.05
    with pytest.raises(ValueError):
        clustering.agreement(truth, truth[:-1])


def test_kmeans_and_hierarchical_baselines():
    labels = np.repeat([0, 1, 2], 6)
    B = _block_matrix(labels, diag=1.0, off=0.0, noise=0.05, seed=10)
    vecs = clustering.representative_vectors(B)
    km = clustering.kmeans_cluster(vecs, 3, seed=0)
    assert clustering.agreement(labels, km) == 1.0
    D = clustering.distance_matrix(B)
    for method in ("single", "average", "complete"):
        hc = clustering.hierarchical_cluster(D, method, 3)
        assert clustering.agreement(labels, hc) == 1.0
    with pytest.raises(ValueError):
        clustering.hierarchical_cluster(D, "ward", 3)
    with pytest.raises(ValueError):
        clustering.kmeans_cluster(vecs, 0, seed=0)


def test_save_labels_and_report(tmp_path):
    labels = np.array([0, 0, 1])
    clustering.save_labels(labels, tmp_path / "labels.csv")
    rows = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert rows[0] == "node,label"
    assert rows[1:] == ["0,0", "1,0", "2,1"]
    score = clustering.BlockScore(h=0.5, d=1.0, g=2.0, n_used=2)
    clustering.save_report(score, 0.9, tmp_path / "report.json")
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["g"] == 2.0
    assert payload["g_normalized"] == 1.0
    assert payload["agreement"] == 0.9
