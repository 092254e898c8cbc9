import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circform.graph import (
    EigensolveError,
    FormationGraph,
    GraphError,
    consensus_matrix,
    incidence_matrix,
    is_acyclic,
    is_connected,
    verify_hurwitz,
)
from oracles import incidence_by_definition, jacobi_eigenvalues


@st.composite
def trees(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    edges = []
    for v in range(2, n + 1):
        u = draw(st.integers(1, v - 1))
        edges.append((u, v) if draw(st.booleans()) else (v, u))
    order = draw(st.permutations(range(len(edges))))
    return FormationGraph(n, tuple(edges[i] for i in order))


@st.composite
def cyclic_graphs(draw, max_n=12):
    tree = draw(trees(max_n).filter(lambda g: g.vertex_count >= 3))
    present = {frozenset(e) for e in tree.edges}
    candidates = [
        (a, b) for a in range(1, tree.vertex_count + 1) for b in range(a + 1, tree.vertex_count + 1)
        if frozenset((a, b)) not in present
    ]
    extra = draw(st.sampled_from(candidates))
    return FormationGraph(tree.vertex_count, tree.edges + (extra,))


def test_incidence_examples():
    assert incidence_matrix(FormationGraph(3, ((1, 2), (2, 3)))).tolist() == [[1, 0], [-1, 1], [0, -1]]
    assert incidence_matrix(FormationGraph(2, ((1, 2),))).tolist() == [[1], [-1]]
    assert incidence_matrix(FormationGraph(3, ((2, 1), (2, 3)))).tolist() == [[-1, 0], [1, 1], [0, -1]]


def test_acyclic_and_connected_examples():
    g = FormationGraph(3, ((1, 2), (2, 3)))
    assert is_acyclic(g) and is_connected(g)
    assert not is_acyclic(FormationGraph(3, ((1, 2), (2, 3), (3, 1))))
    split = FormationGraph(4, ((1, 2), (3, 4)))
    assert is_acyclic(split) and not is_connected(split)


def test_consensus_examples():
    assert consensus_matrix(FormationGraph(3, ((1, 2), (2, 3)))).tolist() == [[-2, 1], [1, -2]]
    assert consensus_matrix(FormationGraph(2, ((1, 2),))).tolist() == [[-2]]
    assert consensus_matrix(FormationGraph(3, ((2, 1), (2, 3)))).tolist() == [[-2, -1], [-1, -2]]


def test_hurwitz_examples():
    rep = verify_hurwitz(np.array([[-2, 1], [1, -2]]))
    assert rep.max_real_eigenvalue == pytest.approx(-1.0, abs=1e-12) and rep.is_hurwitz
    rep = verify_hurwitz(np.array([[0]]))
    assert rep.max_real_eigenvalue == 0.0 and not rep.is_hurwitz
    tri = consensus_matrix(FormationGraph(3, ((1, 2), (2, 3), (3, 1))))
    rep = verify_hurwitz(tri)
    assert not rep.is_hurwitz
    assert min(abs(v) for v in jacobi_eigenvalues(tri)) < 1e-9


@pytest.mark.parametrize(
    "n, edges, match",
    [
        (3, ((1, 1),), "self-loop"),
        (3, ((1, 2), (2, 1)), "duplicate"),
        (3, ((1, 4),), "outside"),
        (3, ((0, 1),), "outside"),
    ],
)
def test_graph_rejects_invalid(n, edges, match):
    with pytest.raises(GraphError, match=match):
        FormationGraph(n, edges)


def test_verify_hurwitz_rejects_bad_input():
    with pytest.raises(ValueError):
        verify_hurwitz(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        verify_hurwitz(np.zeros((2, 3)))
    with pytest.raises((EigensolveError, ValueError)):
        verify_hurwitz(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_degrees_and_neighbors(path_graph):
    assert [path_graph.degree(v) for v in (1, 2, 3)] == [1, 2, 1]
    assert path_graph.max_degree == 2
    assert sorted(path_graph.neighbors(2)) == [1, 3]
    assert path_graph.incident_edges(2) == [0, 1]


def test_from_incidence_round_trip(path_graph):
    assert FormationGraph.from_incidence(incidence_matrix(path_graph)) == path_graph


@settings(max_examples=200, deadline=None)
@given(trees())
def test_trees_are_hurwitz(g):
    a = consensus_matrix(g)
    assert np.array_equal(a, a.T)
    b = incidence_matrix(g)
    assert np.array_equal(a, -(b.T @ b))
    assert np.array_equal(b, incidence_by_definition(g.vertex_count, g.edges))
    assert not b.sum(axis=0).any()
    oracle = jacobi_eigenvalues(a)
    assert oracle.max() < -1e-9
    rep = verify_hurwitz(a)
    assert rep.is_hurwitz
    np.testing.assert_allclose(sorted(rep.eigenvalues), oracle, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(cyclic_graphs())
def test_cycles_have_zero_eigenvalue(g):
    assert not is_acyclic(g)
    a = consensus_matrix(g)
    assert min(abs(v) for v in jacobi_eigenvalues(a)) < 1e-9
    assert not verify_hurwitz(a).is_hurwitz


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.data())
def test_flags_match_networkx(n, data):
    pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=min(len(pairs), 14))) if pairs else []
    g = FormationGraph(n, tuple(chosen))
    ref = nx.Graph()
    ref.add_nodes_from(range(1, n + 1))
    ref.add_edges_from(chosen)
    assert is_acyclic(g) == nx.is_forest(ref)
    assert is_connected(g) == nx.is_connected(ref)
