import numpy as np
import pytest
from hypothesis import given, strategies as st

from atcdiging.errors import NotDoublyStochastic
from atcdiging.network import (Graph, GraphSequence, MixingMatrix, averaging_matrix,
                               complete_graph, contraction_factor, format_edgelist,
                               metropolis_weights, next_graph, parse_edgelist, path_graph,
                               random_spanning_tree, read_edgelist, ring_graph, star_graph,
                               verify_contraction, write_edgelist)


def eig_delta(w):
    """Oracle: spectral norm of W - 11'/n from a dense SVD."""
    n = w.shape[0]
    return float(np.linalg.svd(w - np.full((n, n), 1.0 / n), compute_uv=False)[0])


def random_connected(n, q, seed):
    return next_graph(GraphSequence.random(n, q, seed), 0)


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 3)}))
    with pytest.raises(ValueError):
        Graph(0)
    g = Graph.from_edges(3, [(1, 0), (0, 1), (2, 1)])
    assert g.edges == frozenset({(0, 1), (1, 2)})


def test_graph_from_adjacency_roundtrip():
    g = ring_graph(5)
    assert Graph.from_adjacency(g.adjacency) == g
    assert g.neighbors(0) == [1, 4]
    assert list(g.degrees) == [2] * 5


def test_connectivity():
    assert path_graph(4).is_connected()
    assert not Graph(2).is_connected()
    assert Graph(1).is_connected()
    assert not Graph.from_edges(4, [(0, 1), (2, 3)]).is_connected()


def test_metropolis_two_node_path():
    w = metropolis_weights(path_graph(2)).weights
    assert np.array_equal(w, [[0.5, 0.5], [0.5, 0.5]])


def test_metropolis_single_node():
    assert np.array_equal(metropolis_weights(Graph(1)).weights, [[1.0]])


def test_metropolis_three_node_path():
    w = metropolis_weights(path_graph(3)).weights
    expected = np.array([[2, 1, 0], [1, 1, 1], [0, 1, 2]]) / 3
    assert np.allclose(w, expected, atol=1e-15)


@given(st.integers(1, 25), st.floats(0, 1), st.integers(0, 10 ** 6))
def test_metropolis_properties(n, q, seed):
    g = random_connected(n, q, seed)
    w = metropolis_weights(g).weights
    assert np.array_equal(w, w.T)
    assert np.all(w >= 0)
    assert np.max(np.abs(w.sum(0) - 1)) <= 1e-12
    assert np.max(np.abs(w.sum(1) - 1)) <= 1e-12
    off = ~(g.adjacency | np.eye(n, dtype=bool))
    assert np.all(w[off] == 0)
    d = contraction_factor(w)
    assert 0 <= d < 1


def test_delta_complete_averaging_is_zero():
    assert contraction_factor(averaging_matrix(5)) == pytest.approx(0.0, abs=1e-12)
    assert contraction_factor(metropolis_weights(complete_graph(7))) == pytest.approx(0.0, abs=1e-7)


def test_delta_three_node_path():
    w = metropolis_weights(path_graph(3))
    assert w.delta == pytest.approx(2 / 3, abs=1e-9)
    assert eig_delta(w.weights) == pytest.approx(2 / 3, abs=1e-12)


def test_delta_identity_disconnected():
    assert contraction_factor(np.eye(2)) == pytest.approx(1.0, abs=1e-12)
    assert not Graph(2).is_connected()


def test_delta_nonsymmetric_doubly_stochastic():
    # a permutation-free circulant that is doubly stochastic but not symmetric
    w = np.array([[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]])
    assert contraction_factor(w) == pytest.approx(eig_delta(w), abs=1e-9)


@pytest.mark.parametrize("bad", [
    np.array([[0.5, 0.5], [0.4, 0.6]]),
    np.array([[1.5, -0.5], [-0.5, 1.5]]),
    np.ones((2, 3)) / 3,
    np.array([[np.nan, 1.0], [1.0, 0.0]]),
])
def test_not_doubly_stochastic(bad):
    with pytest.raises(NotDoublyStochastic):
        contraction_factor(bad)
    with pytest.raises(NotDoublyStochastic):
        MixingMatrix(bad)


def test_mixing_matrix_graph_compliance():
    with pytest.raises(ValueError):
        MixingMatrix(np.full((3, 3), 1 / 3), path_graph(3))
    w = metropolis_weights(path_graph(3))
    assert not w.weights.flags.writeable


def test_delta_matches_dense_oracle_on_random_graphs():
    rng = np.random.default_rng(11)
    for t in range(60):
        n = int(rng.integers(2, 31))
        g = random_connected(n, float(rng.uniform(0, 0.6)), t)
        w = metropolis_weights(g).weights
        assert contraction_factor(w) == pytest.approx(eig_delta(w), abs=1e-9)


def test_verify_contraction_averaging():
    assert verify_contraction(averaging_matrix(4), trials=50) == pytest.approx(0.0, abs=1e-12)


def test_verify_contraction_three_node_path():
    assert verify_contraction(metropolis_weights(path_graph(3)), trials=1000) <= 2 / 3 + 1e-9


def test_verify_contraction_consensual_draws_count_as_zero():
    # with n = 1 every draw is consensual
    assert verify_contraction(np.eye(1), trials=10) == 0.0
    with pytest.raises(ValueError):
        verify_contraction(np.eye(2), trials=0)


@pytest.mark.parametrize("make", [ring_graph, star_graph, path_graph])
def test_verify_contraction_bounded_by_delta(make):
    w = metropolis_weights(make(8))
    assert verify_contraction(w, trials=1000, seed=2) <= w.delta + 1e-9


def test_spanning_tree_is_tree():
    rng = np.random.default_rng(0)
    for n in range(1, 20):
        edges = random_spanning_tree(n, rng)
        assert len(edges) == n - 1
        assert Graph.from_edges(n, edges).is_connected()


def test_static_sequence_returns_same_graph():
    g = ring_graph(6)
    seq = GraphSequence.static(g)
    assert next_graph(seq, 0) is g and next_graph(seq, 99) is g
    assert seq.mixing(3) is seq.mixing(4)


def test_static_sequence_rejects_disconnected():
    with pytest.raises(ValueError):
        GraphSequence.static(Graph(3))


def test_random_sequence_deterministic_and_connected():
    seq = GraphSequence.random(12, 0.3, seed=5)
    for k in range(100):
        g = next_graph(seq, k)
        assert g.is_connected()
        assert np.array_equal(g.adjacency, next_graph(GraphSequence.random(12, 0.3, 5), k).adjacency)
    assert next_graph(seq, 0) != next_graph(seq, 1)


def test_random_sequence_validation():
    with pytest.raises(ValueError):
        GraphSequence.random(0)
    with pytest.raises(ValueError):
        GraphSequence.random(4, edge_prob=1.5)
    with pytest.raises(ValueError):
        GraphSequence(mode="other", n=3)


def test_edgelist_roundtrip(tmp_path):
    g = random_connected(9, 0.4, 3)
    text = format_edgelist(g)
    assert text.startswith("n 9\n")
    assert parse_edgelist(text) == g
    path = tmp_path / "g.txt"
    write_edgelist(g, path)
    assert read_edgelist(path) == g


def test_edgelist_errors():
    with pytest.raises(ValueError):
        parse_edgelist("0 1\n")
    with pytest.raises(ValueError):
        parse_edgelist("n 3\n0 1 2\n")
    assert parse_edgelist("# comment\nn 2\n\n0 1\n") == path_graph(2)
