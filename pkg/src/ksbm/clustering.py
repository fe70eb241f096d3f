"""Block-structure scoring and community detection on pairwise matrices.

The block-clustering score g = d / h compares discriminativity across
community blocks with homogeneity inside them; g > 1 indicates visible
block structure.  Communities are estimated without a preset count by
iterative medoid splitting that maximizes the normalized score g / k,
with optional pruning down to a target count and standard baselines
(k-means, hierarchical linkage) for comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist, squareform

__all__ = [
    "BlockScore",
    "CommunityEstimate",
    "homogeneity",
    "discriminativity",
    "block_clustering",
    "tensor_block_metrics",
    "representative_vectors",
    "distance_matrix",
    "sce",
    "prune",
    "agreement",
    "kmeans_cluster",
    "hierarchical_cluster",
    "save_labels",
    "save_report",
]


@dataclass
class BlockScore:
    """Homogeneity h, discriminativity d, and their ratio g for one partition."""

    h: float
    d: float
    g: float
    n_used: int
    infinite: bool = False


@dataclass
class CommunityEstimate:
    """Estimated labels with per-community medoids and normalized score."""

    labels: np.ndarray
    medoids: np.ndarray
    score: float
    trace: list[float] = field(default_factory=list)

    @property
    def n_communities(self) -> int:
        return int(self.medoids.size)


def _as_labels(G) -> np.ndarray:
    """Accept a label array or any object exposing ``.labels``."""
    labels = getattr(G, "labels", G)
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    return labels


def _members(labels: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(labels == r) for r in np.unique(labels)]


def homogeneity(B: np.ndarray, G) -> float:
    """Mean over all (r, s) block pairs of the within-block entry variance.

    Population variance convention; blocks include diagonal entries.
    """
    B = np.asarray(B, dtype=float)
    groups = _members(_as_labels(G))
    n = len(groups)
    total = 0.0
    for gr in groups:
        for gs in groups:
            total += float(np.var(B[np.ix_(gr, gs)]))
    return total / n ** 2


def discriminativity(B: np.ndarray, G) -> float:
    """Spread of block means against the corresponding diagonal blocks:

        (1/n^2) sum_{r,s} (B_rs - B_rr)^2 + (B_rs - B_ss)^2
    """
    B = np.asarray(B, dtype=float)
    groups = _members(_as_labels(G))
    n = len(groups)
    means = np.empty((n, n))
    for r, gr in enumerate(groups):
        for s, gs in enumerate(groups):
            means[r, s] = B[np.ix_(gr, gs)].mean()
    diag = np.diag(means)
    return float(np.sum((means - diag[:, None]) ** 2 + (means - diag[None, :]) ** 2)) / n ** 2


def block_clustering(B: np.ndarray, G, stabilizer: float = 0.0) -> BlockScore:
    """Block-clustering score g = d / (h + stabilizer) of a matrix.

    A zero denominator with nonzero d yields an infinite-score sentinel
    (flagged); a fully constant matrix scores 0.
    """
    if stabilizer < 0:
        raise ValueError("stabilizer must be >= 0")
    labels = _as_labels(G)
    h = homogeneity(B, labels)
    d = discriminativity(B, labels)
    denom = h + stabilizer
    if denom == 0.0:
        if d == 0.0:
            return BlockScore(h, d, 0.0, int(np.unique(labels).size))
        return BlockScore(h, d, math.inf, int(np.unique(labels).size), infinite=True)
    return BlockScore(h, d, d / denom, int(np.unique(labels).size))


def tensor_block_metrics(B: np.ndarray, G, stabilizer: float = 0.0) -> BlockScore:
    """Order-M generalization of h / d / g over block multi-indices.

    Each multi-index block is compared against the M diagonal blocks of
    its component communities; reduces exactly to the matrix metrics at
    M = 2.
    """
    B = np.asarray(B, dtype=float)
    M = B.ndim
    if M < 2:
        raise ValueError("need an order >= 2 tensor")
    groups = _members(_as_labels(G))
    n = len(groups)
    block_means = {}
    h = 0.0
    for multi in np.ndindex(*(n,) * M):
        block = B[np.ix_(*(groups[r] for r in multi))]
        h += float(np.var(block))
        block_means[multi] = float(block.mean())
    d = 0.0
    for multi, mean in block_means.items():
        for r in multi:
            d += (mean - block_means[(r,) * M]) ** 2
    h /= n ** M
    d /= n ** M
    denom = h + stabilizer
    if denom == 0.0:
        g, infinite = (0.0, False) if d == 0.0 else (math.inf, True)
    else:
        g, infinite = d / denom, False
    return BlockScore(h, d, g, n, infinite)


def representative_vectors(B: np.ndarray, mode: str = "rowcol") -> np.ndarray:
    """Per-node feature vectors used for medoid distances.

    Matrices: row i and column i concatenated (``rowcol``) or column i
    alone (``column``).  Higher-order tensors: the slices fixing node i
    at each index position, concatenated.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        if B.shape[0] != B.shape[1]:
            raise ValueError("matrix must be square")
        if mode == "rowcol":
            return np.concatenate([B, B.T], axis=1)
        if mode == "column":
            return B.T.copy()
        raise ValueError(f"unknown representative mode {mode!r}")
    N = B.shape[0]
    if any(s != N for s in B.shape):
        raise ValueError("tensor axes must all have the node count")
    parts = [np.moveaxis(B, p, 0).reshape(N, -1) for p in range(B.ndim)]
    return np.concatenate(parts, axis=1)


def distance_matrix(B: np.ndarray, mode: str = "rowcol") -> np.ndarray:
    """Pairwise l2 distances between representative vectors."""
    vecs = representative_vectors(B, mode)
    D = cdist(vecs, vecs)
    np.fill_diagonal(D, 0.0)
    return (D + D.T) / 2.0


def _normalized_score(B, labels, stabilizer, tensor: bool) -> float:
    score = (tensor_block_metrics if tensor else block_clustering)(B, labels, stabilizer)
    k = np.unique(labels).size
    return score.g / k if np.isfinite(score.g) else math.inf


def sce(B: np.ndarray, stabilizer: float = 0.0, mode: str = "rowcol",
        max_communities: int | None = None) -> CommunityEstimate:
    """Medoid-splitting community estimation maximizing g / k.

    Starting from a single community, each round promotes the most
    dissimilar intra-community pair to medoids, reassigns every node to
    its nearest medoid, and keeps the split while the normalized score
    increases.  Ties break toward the lowest index.
    """
    B = np.asarray(B, dtype=float)
    N = B.shape[0]
    if N < 2:
        raise ValueError("need at least two nodes")
    tensor = B.ndim > 2
    vecs = representative_vectors(B, mode)
    D = cdist(vecs, vecs)
    cap = N if max_communities is None else min(max_communities, N)

    labels = np.zeros(N, dtype=int)
    medoids = np.array([], dtype=int)
    best = _normalized_score(B, labels, stabilizer, tensor)
    trace = [best]
    while np.unique(labels).size < cap:
        k = np.unique(labels).size
        same = labels[:, None] == labels[None, :]
        candidates = np.where(same, D, -np.inf)
        np.fill_diagonal(candidates, -np.inf)
        if not np.isfinite(candidates).any():
            break
        i_star, j_star = np.unravel_index(np.argmax(candidates), candidates.shape)
        if medoids.size == 0:
            new_medoids = np.array([i_star, j_star], dtype=int)
        else:
            new_medoids = medoids.copy()
            new_medoids[labels[i_star]] = i_star
            new_medoids = np.append(new_medoids, j_star)
        new_labels = np.argmin(D[:, new_medoids], axis=1)
        # medoids must carry their own label even under duplicate vectors
        new_labels[new_medoids] = np.arange(new_medoids.size)
        if np.unique(new_labels).size != k + 1:
            break
        candidate = _normalized_score(B, new_labels, stabilizer, tensor)
        if candidate > best:
            labels, medoids, best = new_labels, new_medoids, candidate
            trace.append(best)
        else:
            break
    if medoids.size == 0:
        medoids = np.array([int(np.argmin(D.sum(axis=1)))], dtype=int)
    return CommunityEstimate(labels, medoids, best, trace)


def prune(estimate: CommunityEstimate, D: np.ndarray, K: int,
          B: np.ndarray | None = None, stabilizer: float = 0.0) -> CommunityEstimate:
    """Merge estimated communities down to K by smallest average distance.

    Agglomerative on the community level: at each step the pair of
    communities with minimal mean inter-community D merges (lowest index
    pair on ties).  The score is recomputed when B is supplied.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    labels = estimate.labels.copy()
    medoids = dict(enumerate(estimate.medoids))
    while len(np.unique(labels)) > K:
        present = list(np.unique(labels))
        best_pair, best_dist = None, math.inf
        for a in range(len(present)):
            for b in range(a + 1, len(present)):
                ga = np.flatnonzero(labels == present[a])
                gb = np.flatnonzero(labels == present[b])
                dist = float(D[np.ix_(ga, gb)].mean())
                if dist < best_dist:
                    best_pair, best_dist = (present[a], present[b]), dist
        a, b = best_pair
        labels[labels == b] = a
        medoids.pop(b, None)
    kept = np.unique(labels)
    remap = {old: new for new, old in enumerate(kept)}
    labels = np.array([remap[v] for v in labels], dtype=int)
    new_medoids = np.array([medoids[old] for old in kept], dtype=int)
    if B is not None:
        score = _normalized_score(B, labels, stabilizer, np.asarray(B).ndim > 2)
    else:
        score = math.nan
    return CommunityEstimate(labels, new_medoids, score, list(estimate.trace))


def agreement(G_true, G_est) -> float:
    """Fraction of nodes correctly labeled under the best label matching.

    Estimated labels map injectively into true labels via an optimal
    assignment on the contingency table; surplus estimated labels stay
    unmatched and count as errors, so over-split estimates can score
    below 1/n.
    """
    true = _as_labels(G_true)
    est = _as_labels(G_est)
    if true.size != est.size:
        raise ValueError("label arrays must have equal length")
    t_vals, t_idx = np.unique(true, return_inverse=True)
    e_vals, e_idx = np.unique(est, return_inverse=True)
    table = np.zeros((e_vals.size, t_vals.size), dtype=int)
    np.add.at(table, (e_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum()) / true.size


def kmeans_cluster(vectors: np.ndarray, K: int, seed: int) -> np.ndarray:
    """Seeded k-means baseline on representative vectors."""
    from sklearn.cluster import KMeans

    if K < 1:
        raise ValueError("K must be >= 1")
    model = KMeans(n_clusters=K, random_state=seed, n_init=10)
    return model.fit_predict(np.asarray(vectors, dtype=float))


def hierarchical_cluster(D: np.ndarray, linkage_method: str, K: int) -> np.ndarray:
    """Agglomerative baseline on a distance matrix (single/average/complete)."""
    if linkage_method not in {"single", "average", "complete"}:
        raise ValueError(f"unsupported linkage {linkage_method!r}")
    if K < 1:
        raise ValueError("K must be >= 1")
    condensed = squareform(np.asarray(D, dtype=float), checks=False)
    Z = linkage(condensed, method=linkage_method)
    return fcluster(Z, t=K, criterion="maxclust") - 1


def save_labels(labels: np.ndarray, path) -> None:
    """Write (node, label) rows as CSV."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,label\n")
        for i, lab in enumerate(np.asarray(labels)):
            fh.write(f"{i},{int(lab)}\n")


def save_report(score: BlockScore, agreement_value: float | None, path) -> None:
    """Write the scoring summary as JSON."""
    payload = {
        "h": score.h,
        "d": score.d,
        "g": None if score.infinite else score.g,
        "g_infinite": score.infinite,
        "g_normalized": None if score.infinite else score.g / score.n_used,
        "k": score.n_used,
        "agreement": agreement_value,
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
