"""Unit tests for coupling-graph generation and persistence."""

import numpy as np
import pytest

from ksbm import graphs


def test_community_assignment_labels_and_members():
    comm = graphs.CommunityAssignment(3, 4)
    assert comm.size == 12
    assert np.array_equal(comm.labels, np.repeat([0, 1, 2], 4))
    assert np.array_equal(comm.members(1), [4, 5, 6, 7])


def test_community_assignment_validation():
    with pytest.raises(ValueError):
        graphs.CommunityAssignment(0, 4)
    with pytest.raises(ValueError):
        graphs.CommunityAssignment(3, 0)


def test_sbm_extreme_probabilities():
    empty = graphs.generate_sbm(2, 5, np.zeros((2, 2)), seed=0)
    assert empty.adjacency.sum() == 0
    full = graphs.generate_sbm(2, 5, np.ones((2, 2)), seed=0)
    N = 10
    assert full.adjacency.sum() == N * (N - 1)
    assert not np.any(np.diag(full.adjacency))


def test_sbm_deterministic_per_seed():
    a = graphs.generate_sbm(3, 4, np.full((3, 3), 0.5), seed=7)
    b = graphs.generate_sbm(3, 4, np.full((3, 3), 0.5), seed=7)
    c = graphs.generate_sbm(3, 4, np.full((3, 3), 0.5), seed=8)
    assert np.array_equal(a.adjacency, b.adjacency)
    assert not np.array_equal(a.adjacency, c.adjacency)


def test_sbm_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        graphs.generate_sbm(2, 3, np.full((2, 2), 1.5), seed=0)
    with pytest.raises(ValueError):
        graphs.generate_sbm(2, 3, np.zeros((3, 3)), seed=0)


def test_assortative_structure():
    n, m, kappa = 3, 5, 30.0
    g = graphs.generate_assortative(n, m, kappa, seed=1)
    N = n * m
    # complete communities
    for r in range(n):
        block = g.adjacency[np.ix_(g.communities.members(r), g.communities.members(r))]
        assert np.array_equal(block, np.ones((m, m), dtype=np.int8) - np.eye(m, dtype=np.int8))
    # symmetric presence, at least one inter-community edge per node
    assert np.array_equal(g.adjacency, g.adjacency.T)
    labels = g.communities.labels
    inter = g.adjacency * (labels[:, None] != labels[None, :])
    assert np.all(inter.sum(axis=1) >= 1)
    # uniform coupling kappa / N on edges, zero elsewhere
    assert np.allclose(g.coupling[g.adjacency == 1], kappa / N)
    assert np.all(g.coupling[g.adjacency == 0] == 0)


def test_assortative_deterministic_per_seed():
    a = graphs.generate_assortative(3, 4, 10.0, seed=3)
    b = graphs.generate_assortative(3, 4, 10.0, seed=3)
    assert np.array_equal(a.adjacency, b.adjacency)


def test_assortative_edge_probability_formula():
    q = 1.0 / (33 * 2)
    assert graphs.assortative_edge_probability(3, 33) == pytest.approx(2 * q - q * q)
    with pytest.raises(ValueError):
        graphs.assortative_edge_probability(1, 33)


def test_hierarchical_structure():
    spec = graphs.HierarchicalSpec(n1=4, n2=2, ratio=0.5, m=6)
    assert spec.extra_edges_per_node == int(0.5 * 6 * 1)
    g = graphs.generate_hierarchical(spec, 40.0, seed=2)
    coarse = spec.coarse_labels()
    assert np.array_equal(np.unique(coarse), [0, 1])
    # fine communities complete
    for r in range(spec.n1):
        block = g.adjacency[np.ix_(g.communities.members(r), g.communities.members(r))]
        assert block.sum() == 6 * 5
    # every node connects outside its coarse community
    outside = g.adjacency * (coarse[:, None] != coarse[None, :])
    assert np.all(outside.sum(axis=1) >= 1)
    # intra-coarse inter-fine edges present
    fine = g.communities.labels
    intra_coarse = g.adjacency * ((coarse[:, None] == coarse[None, :])
                                  & (fine[:, None] != fine[None, :]))
    assert np.all(intra_coarse.sum(axis=1) >= 1)


def test_hierarchical_warns_when_no_extra_edges():
    spec = graphs.HierarchicalSpec(n1=4, n2=2, ratio=0.05, m=3)
    assert spec.extra_edges_per_node == 0
    with pytest.warns(UserWarning):
        graphs.generate_hierarchical(spec, 10.0, seed=0)


def test_hierarchical_spec_validation():
    with pytest.raises(ValueError):
        graphs.HierarchicalSpec(n1=5, n2=2, ratio=0.5, m=3)
    with pytest.raises(ValueError):
        graphs.HierarchicalSpec(n1=4, n2=2, ratio=0.0, m=3)


def test_block_edge_density():
    g = graphs.generate_assortative(3, 5, 15.0, seed=4)
    P = graphs.block_edge_density(g)
    # complete blocks minus the diagonal
    assert np.allclose(np.diag(P), (5 * 4) / 25)
    assert np.all(P >= 0) and np.all(P <= 1)
    assert np.allclose(P, P.T)


def test_graph_roundtrip(tmp_path):
    g = graphs.generate_assortative(3, 4, 12.0, seed=5)
    graphs.save_graph(g, tmp_path / "graph")
    loaded = graphs.load_graph(tmp_path / "graph")
    assert np.array_equal(loaded.adjacency, g.adjacency)
    assert np.allclose(loaded.coupling, g.coupling)
    assert loaded.kind == g.kind
    assert loaded.seed == g.seed


def test_coupling_graph_validation():
    comm = graphs.CommunityAssignment(2, 2)
    A = np.eye(4, dtype=np.int8)
    with pytest.raises(ValueError):
        graphs.CouplingGraph(A, A.astype(float), comm, "sbm")
    A = np.zeros((4, 4), dtype=np.int8)
    C = np.ones((4, 4))
    with pytest.raises(ValueError):
        graphs.CouplingGraph(A, C, comm, "sbm")
