"""Random coupling graphs with planted community structure.

Three constructions are provided:

* ``generate_sbm`` -- general stochastic block model with a per-block-pair
  edge probability matrix.
* ``generate_assortative`` -- fully connected communities plus one random
  outgoing inter-community edge per node, all couplings ``kappa / N``.
* ``generate_hierarchical`` -- two-level variant where fine communities are
  complete, each node gains a fixed number of edges inside its coarse
  community and one edge outside it.

All samplers are pure functions of their parameters and seed.  Graph
sampling consumes a documented draw order (row-major over nodes) so that
generated graphs are stable across runs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CommunityAssignment",
    "CouplingGraph",
    "HierarchicalSpec",
    "generate_sbm",
    "generate_assortative",
    "generate_hierarchical",
    "assortative_edge_probability",
    "block_edge_density",
    "save_graph",
    "load_graph",
]


@dataclass(frozen=True)
class CommunityAssignment:
    """Balanced partition of ``N = n * m`` nodes into ``n`` communities.

    Node ``i`` (0-based) belongs to community ``i // m``, i.e. communities
    occupy contiguous index blocks.
    """

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 communities of m >= 1 nodes")

    @property
    def size(self) -> int:
        return self.n * self.m

    @property
    def labels(self) -> np.ndarray:
        """Community label of every node, shape (N,)."""
        return np.repeat(np.arange(self.n), self.m)

    def members(self, r: int) -> np.ndarray:
        """Node indices of community ``r``."""
        return np.arange(r * self.m, (r + 1) * self.m)


@dataclass(frozen=True)
class HierarchicalSpec:
    """Two-level community layout.

    ``n1`` fine communities of ``m`` nodes grouped into ``n2`` coarse
    communities (consecutive fine communities); ``ratio`` controls how many
    intra-coarse inter-fine edges each node receives.
    """

    n1: int
    n2: int
    ratio: float
    m: int

    def __post_init__(self):
        if self.n1 % self.n2 != 0:
            raise ValueError("n2 must divide n1")
        if not 0 < self.ratio <= 1:
            raise ValueError("ratio must lie in (0, 1]")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def extra_edges_per_node(self) -> int:
        """Intra-coarse inter-fine edges added per node (floor rounding)."""
        return int(self.ratio * self.m * (self.n2 - 1))

    def coarse_labels(self) -> np.ndarray:
        """Coarse community label of every node."""
        per_coarse = self.n1 // self.n2
        fine = np.repeat(np.arange(self.n1), self.m)
        return fine // per_coarse


@dataclass(frozen=True)
class CouplingGraph:
    """Directed adjacency plus weighted coupling matrix.

    ``coupling[i, j]`` is the influence of oscillator ``j`` on ``i`` in
    rad/s; it is nonzero only where ``adjacency[i, j] == 1``.
    """

    adjacency: np.ndarray
    coupling: np.ndarray
    communities: CommunityAssignment
    kind: str
    seed: int | None = None

    def __post_init__(self):
        N = self.communities.size
        if self.adjacency.shape != (N, N) or self.coupling.shape != (N, N):
            raise ValueError("matrix shapes must match community size")
        if np.any(np.diag(self.adjacency)):
            raise ValueError("self-loops are not allowed")
        if np.any((self.coupling != 0) & (self.adjacency == 0)):
            raise ValueError("coupling must vanish where there is no edge")

    @property
    def n_nodes(self) -> int:
        return self.communities.size


def generate_sbm(n: int, m: int, P: np.ndarray, seed: int) -> CouplingGraph:
    """Sample a directed SBM adjacency with unit couplings on edges.

    Each off-diagonal entry ``A[i, j]`` is an independent Bernoulli draw
    with probability ``P[label(i), label(j)]``.  Entries are drawn
    row-major so the result is reproducible for a fixed seed.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (n, n):
        raise ValueError(f"P must be {n}x{n}")
    if np.any(P < 0) or np.any(P > 1):
        raise ValueError("entries of P must be probabilities in [0, 1]")
    comm = CommunityAssignment(n, m)
    N = comm.size
    labels = comm.labels
    rng = np.random.default_rng(seed)
    probs = P[np.ix_(labels, labels)]
    A = (rng.random((N, N)) < probs).astype(np.int8)
    np.fill_diagonal(A, 0)
    return CouplingGraph(A, A.astype(float), comm, "sbm", seed)


def assortative_edge_probability(n: int, m: int) -> float:
    """Probability that a given inter-community pair ends up connected.

    Each node draws one target uniformly among the ``m (n - 1)`` nodes
    outside its community; the pair is connected if either direction was
    drawn, giving ``2 q - q**2`` with ``q = 1 / (m (n - 1))``.
    """
    if n < 2:
        raise ValueError("need at least two communities")
    q = 1.0 / (m * (n - 1))
    return 2.0 * q - q * q


def generate_assortative(n: int, m: int, kappa: float, seed: int) -> CouplingGraph:
    """Sample an assortative coupling graph.

    Communities are complete; every node additionally draws one target
    uniformly outside its own community (with replacement across nodes,
    duplicate edges collapse).  Edge presence is symmetrized and every
    edge carries coupling ``kappa / N``.
    """
    if n < 2:
        raise ValueError("assortative graphs need at least two communities")
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")
    comm = CommunityAssignment(n, m)
    N = comm.size
    labels = comm.labels
    A = np.zeros((N, N), dtype=np.int8)
    for r in range(n):
        block = comm.members(r)
        A[np.ix_(block, block)] = 1
    rng = np.random.default_rng(seed)
    # one outgoing inter-community target per node, drawn in node order
    for i in range(N):
        outside = np.flatnonzero(labels != labels[i])
        j = outside[rng.integers(outside.size)]
        A[i, j] = 1
        A[j, i] = 1
    np.fill_diagonal(A, 0)
    return CouplingGraph(A, A * (kappa / N), comm, "assortative", seed)


def generate_hierarchical(spec: HierarchicalSpec, kappa: float, seed: int) -> CouplingGraph:
    """Sample a two-level hierarchical coupling graph.

    Fine communities are complete.  Each node gains
    ``floor(ratio * m * (n2 - 1))`` edges to random nodes in other fine
    communities of its own coarse community, plus one edge to a random
    node outside the coarse community.  All edges carry ``kappa / N``.
    """
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")
    k_extra = spec.extra_edges_per_node
    if k_extra == 0:
        warnings.warn(
            "ratio * m * (n2 - 1) < 1: no intra-coarse edges will be added, "
            "the graph degenerates to an assortative-like coarse structure",
            stacklevel=2,
        )
    comm = CommunityAssignment(spec.n1, spec.m)
    N = comm.size
    fine = comm.labels
    coarse = spec.coarse_labels()
    A = np.zeros((N, N), dtype=np.int8)
    for r in range(spec.n1):
        block = comm.members(r)
        A[np.ix_(block, block)] = 1
    rng = np.random.default_rng(seed)
    for i in range(N):
        intra_coarse = np.flatnonzero((coarse == coarse[i]) & (fine != fine[i]))
        if k_extra > 0 and intra_coarse.size > 0:
            picks = intra_coarse[rng.integers(intra_coarse.size, size=k_extra)]
            A[i, picks] = 1
            A[picks, i] = 1
        outside = np.flatnonzero(coarse != coarse[i])
        j = outside[rng.integers(outside.size)]
        A[i, j] = 1
        A[j, i] = 1
    np.fill_diagonal(A, 0)
    return CouplingGraph(A, A * (kappa / N), comm, "hierarchical", seed)


def block_edge_density(graph: CouplingGraph) -> np.ndarray:
    """Fraction of present edges in each community-pair block.

    Entry (r, s) is the density of the adjacency block between
    communities r and s (self-pairs counted on the full m x m block).
    Useful as the empirical edge-probability matrix for the reduced
    community-level model on a realized graph.
    """
    n = graph.communities.n
    P = np.empty((n, n))
    for r in range(n):
        rows = graph.communities.members(r)
        for s in range(n):
            P[r, s] = (graph.adjacency[np.ix_(rows, graph.communities.members(s))]
                       != 0).mean()
    return P


def save_graph(graph: CouplingGraph, prefix: str | Path) -> None:
    """Write an edge list CSV ``<prefix>.csv`` and a JSON sidecar."""
    prefix = Path(prefix)
    rows = np.argwhere(graph.adjacency != 0)
    weights = graph.coupling[rows[:, 0], rows[:, 1]]
    with open(prefix.with_suffix(".csv"), "w", encoding="utf-8") as fh:
        fh.write("i,j,weight\n")
        for (i, j), w in zip(rows, weights):
            fh.write(f"{i},{j},{float(w)!r}\n")
    sidecar = {
        "n": graph.communities.n,
        "m": graph.communities.m,
        "kind": graph.kind,
        "seed": graph.seed,
    }
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def load_graph(prefix: str | Path) -> CouplingGraph:
    """Read a graph written by :func:`save_graph`."""
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
    comm = CommunityAssignment(meta["n"], meta["m"])
    N = comm.size
    A = np.zeros((N, N), dtype=np.int8)
    C = np.zeros((N, N), dtype=float)
    data = np.genfromtxt(prefix.with_suffix(".csv"), delimiter=",", skip_header=1, ndmin=2)
    if data.size:
        ii = data[:, 0].astype(int)
        jj = data[:, 1].astype(int)
        A[ii, jj] = 1
        C[ii, jj] = data[:, 2]
    return CouplingGraph(A, C, comm, meta["kind"], meta.get("seed"))
