import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from moranfp.families import random_connected
from moranfp.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

K3_TEXT = "moran-graph v1\ndirected 0\n3 3 2\n1: 2 2 3\n2: 2 1 3\n3: 2 1 2\n"


@st.composite
def connected_graphs(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    p = draw(st.sampled_from([0.3, 0.5, 0.8]))
    seed = draw(st.integers(0, 2**32))
    return random_connected(n, p, seed).graph


@st.composite
def graph_and_state(draw, min_n=2, max_n=10):
    """A connected graph with a non-empty proper mutant set."""
    g = draw(connected_graphs(min_n, max_n))
    mask = draw(st.integers(1, (1 << g.n) - 2))
    S = frozenset(v for v in g.vertices() if mask >> (v - 1) & 1)
    return g, S


@st.composite
def any_graphs(draw, max_n=8, directed=None):
    """Arbitrary simple graphs (possibly disconnected)."""
    n = draw(st.integers(1, max_n))
    d = draw(st.booleans()) if directed is None else directed
    pairs = [(u, v) for u in range(1, n + 1) for v in range(1, n + 1) if (u != v and (d or u < v))]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [e for e, k in zip(pairs, keep) if k], directed=d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, printed again in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
