from fractions import Fraction

import pytest
from hypothesis import given

from conftest import K3_TEXT, any_graphs
from moranfp.families import complete, cycle, double_star
from moranfp.graph import (
    Graph,
    GraphConsistencyError,
    GraphFormatError,
    average_degree,
    from_mask,
    load_graph,
    require_process_graph,
    save_graph,
    to_mask,
    validate,
)


def test_load_k3():
    g = load_graph(K3_TEXT)
    assert (g.n, g.m, g.max_degree) == (3, 3, 2)
    assert g.adjacency[1] == [2, 3]
    assert not g.directed


def test_load_bytes_and_no_trailing_newline():
    assert load_graph(K3_TEXT.encode()) == load_graph(K3_TEXT.rstrip("\n"))


def test_declared_m_mismatch():
    with pytest.raises(GraphConsistencyError):
        load_graph(K3_TEXT.replace("3 3 2", "3 4 2"))


def test_self_loop_rejected():
    text = "moran-graph v1\ndirected 0\n2 1 2\n1: 2 2 1\n2: 1 1\n"
    with pytest.raises(GraphConsistencyError):
        load_graph(text)


@pytest.mark.parametrize("text", [
    "",
    "moran-graph v2\ndirected 0\n1 0 0\n1: 0\n",
    "moran-graph v1\ndirected x\n1 0 0\n1: 0\n",
    "moran-graph v1\ndirected 0\n2 1 1\n1: 1 2\n",
    "moran-graph v1\ndirected 0\n2 1 1\n1: 1 two\n2: 1 1\n",
])
def test_parse_errors(text):
    with pytest.raises(GraphFormatError):
        load_graph(text)


def test_asymmetric_and_bad_degree():
    with pytest.raises(GraphConsistencyError):
        load_graph("moran-graph v1\ndirected 0\n2 1 1\n1: 1 2\n2: 0\n")
    with pytest.raises(GraphConsistencyError):
        load_graph(K3_TEXT.replace("1: 2 2 3", "1: 3 2 3"))
    with pytest.raises(GraphConsistencyError):
        load_graph(K3_TEXT.replace("3 3 2", "3 3 3"))


def test_duplicate_neighbour():
    with pytest.raises(GraphConsistencyError):
        Graph.from_lists([[2, 2], [1]])


def test_validate_examples():
    rep = validate(load_graph(K3_TEXT))
    assert rep.connected and rep.invariant_violations == [] and rep.strongly_connected is None
    assert not validate(Graph.from_edges(4, [(1, 2), (3, 4)])).connected
    dc = Graph.from_edges(4, [(1, 2), (2, 3), (3, 4), (4, 1)], directed=True)
    assert validate(dc).strongly_connected
    path = Graph.from_edges(3, [(1, 2), (2, 3)], directed=True)
    rep = validate(path)
    assert rep.connected and not rep.strongly_connected


def test_average_degree_examples():
    assert average_degree(complete(5).graph) == 4
    assert average_degree(cycle(8).graph) == 2
    assert average_degree(double_star(3).graph) == Fraction(7, 4)


def test_single_vertex_loads_but_no_process():
    g = load_graph("moran-graph v1\ndirected 0\n1 0 0\n1: 0\n")
    assert g.n == 1
    with pytest.raises(ValueError):
        require_process_graph(g)


def test_adjacency_order_preserved():
    g = Graph.from_lists([[3, 2], [1], [1]])
    assert g.adjacency[1] == [3, 2]
    assert load_graph(save_graph(g)).adjacency[1] == [3, 2]


@given(any_graphs())
def test_round_trip(g):
    text = save_graph(g)
    h = load_graph(text)
    assert h == g
    assert save_graph(h) == text


@given(any_graphs(directed=False))
def test_handshake(g):
    assert average_degree(g) * g.n == 2 * g.m


@given(any_graphs())
def test_mask_round_trip(g):
    S = frozenset(v for v in g.vertices() if v % 2)
    assert from_mask(to_mask(S)) == S
