from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moranfp.families import (
    FamilyParameterError,
    dir_suppressor,
    double_star,
    generate,
    load_groups,
    default_dir_a,
    default_undir_a,
    random_connected,
    save_groups,
    sigma_levels,
    sigma_potential,
    star,
    undir_suppressor,
)
from moranfp.graph import save_graph, validate


def test_double_star_two():
    h = double_star(2)
    g = h.graph
    assert (g.n, g.m) == (6, 5)
    assert sorted(g.degree_list[1:]) == [1, 1, 1, 1, 3, 3]
    assert h.groups == {"x1": [1], "x2": [2], "L1": [3, 4], "L2": [5, 6]}


def test_dir_suppressor_counts():
    g = dir_suppressor(2, 4).graph
    assert g.n == 10 and g.directed
    # w_ka -> v_k is both a cycle arc and an I_k arc; counted once
    assert g.m == 17


def test_dir_suppressor_nesting():
    h = dir_suppressor(5, 3)
    for i in range(1, 6):
        assert set(h.groups[f"X{i+1}"]) < set(h.groups[f"X{i}"])
    assert h.groups["X6"] == []
    assert validate(h.graph).strongly_connected


def test_undir_suppressor_path():
    h = undir_suppressor(1, 1)
    g = h.graph
    assert g.n == 4 and g.m == 3
    assert [g.adjacency[v] for v in g.vertices()] == [[2], [1, 3], [2, 4], [3]]


@pytest.mark.parametrize("a,k", [(2, 3), (3, 2), (1, 4)])
def test_undir_suppressor_degrees(a, k):
    h = undir_suppressor(a, k, 2)
    g = h.graph
    assert g.n == a * k + a * a * k * k + 2 * a * a * k
    assert len(h.groups["V1"]) == a * a * k * k
    want = {"V0": a * a * k * k, "V1": a * k + 1, "V2": k + 1, "V3": 1}
    for name, d in want.items():
        assert {g.degree_list[v] for v in h.groups[name]} == {d}
    assert validate(g).connected and validate(g).invariant_violations == []


def test_sigma_values():
    h = undir_suppressor(5, 28, 2)
    assert sigma_potential(h, []) == 0
    assert sigma_potential(h, [h.groups["V3"][0]]) == 28
    assert sigma_potential(h, [h.groups["V0"][0]]) == Fraction(282, 19572)
    s0, s1, s2, s3 = sigma_levels(5, 28, Fraction(2))
    assert s1 == 1 and s3 == 28 and s2 == 4 + Fraction(28 * 5 * 4, 699)


def test_sigma_bad_id():
    h = undir_suppressor(2, 2, 2)
    with pytest.raises(ValueError):
        sigma_potential(h, [h.graph.n + 1])


@pytest.mark.parametrize("family,params", [
    ("double_star", {"k": 0}),
    ("dir_suppressor", {"k": 1, "a": 2}),
    ("undir_suppressor", {"a": 0, "k": 1}),
    ("random_connected", {"n": 5, "p": 0}),
    ("nope", {}),
])
def test_bad_params(family, params):
    with pytest.raises(FamilyParameterError):
        generate(family, params, seed=1)


def test_random_connected_needs_seed():
    with pytest.raises(FamilyParameterError):
        generate("random_connected", {"n": 4, "p": 0.5})


def test_random_retry_cap():
    with pytest.raises(FamilyParameterError):
        random_connected(40, 0.01, 0)


def test_default_widths():
    assert default_dir_a(2) == 8
    assert default_undir_a(2) == 14


def test_groups_round_trip():
    groups = dir_suppressor(3, 2).groups
    assert load_groups(save_groups(groups)) == groups


@given(st.sampled_from(["complete", "cycle", "star", "double_star", "path"]), st.integers(3, 12))
def test_families_connected_and_deterministic(family, size):
    params = {"n": size, "k": size}
    h = generate(family, params)
    assert validate(h.graph).connected
    assert save_graph(generate(family, params).graph) == save_graph(h.graph)


@given(st.integers(2, 6), st.integers(1, 4))
def test_dir_suppressor_strong(k, a):
    g = dir_suppressor(k, a).graph
    assert g.n == k * (a + 1)
    assert validate(g).strongly_connected


@given(st.integers(1, 25), st.floats(0.2, 1.0), st.integers(0, 2**40))
def test_random_connected_reproducible(n, p, seed):
    a = random_connected(n, p, seed).graph
    assert validate(a).connected
    assert a == random_connected(n, p, seed).graph


def test_star_groups():
    h = star(3)
    assert Counter(h.graph.degree_list[1:]) == Counter({3: 1, 1: 3})
    assert h.groups["center"] == [1]
