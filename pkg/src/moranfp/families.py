"""Deterministic constructors for the graph families used in the experiments.

Vertex numbering is fixed per family:

* double_star(k): x1=1, x2=2, L1=3..k+2, L2=k+3..2k+2
* dir_suppressor(k, a): w_j=j for j in 1..ka, v_i=ka+i for i in 1..k
* undir_suppressor(a, k): V0, V1, V2, V3 in consecutive blocks; V2 vertex j is the
  centre of the star on V1 vertices jk..jk+k-1 (0-based within V1) and is matched
  to V3 vertex j.
* star(n): centre 1, leaves 2..n+1 (n leaves)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Graph, is_connected

FAMILIES = ("complete", "cycle", "path", "star", "double_star", "dir_suppressor", "undir_suppressor", "random_connected")
RANDOM_RETRY_CAP = 1000


@dataclass
class LabeledGraph:
    graph: Graph
    groups: dict[str, list[int]] = field(default_factory=dict)
    sigma: "SigmaWeights | None" = None


@dataclass(frozen=True)
class SigmaWeights:
    r: Fraction
    a: int
    k: int
    levels: tuple[Fraction, Fraction, Fraction, Fraction]
    bounds: tuple[int, int, int, int, int]  # V_i = ids bounds[i]+1 .. bounds[i+1]

    def level_of(self, v: int) -> int:
        for i in range(4):
            if v <= self.bounds[i + 1]:
                return i
        raise ValueError(v)

    def __getitem__(self, v: int) -> Fraction:
        return self.levels[self.level_of(v)]

    def as_list(self, n: int) -> list[Fraction]:
        out = [Fraction(0)] * (n + 1)
        for i in range(4):
            for v in range(self.bounds[i] + 1, self.bounds[i + 1] + 1):
                out[v] = self.levels[i]
        return out


class FamilyParameterError(ValueError):
    pass


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise FamilyParameterError(msg)


def complete(n: int) -> LabeledGraph:
    _need(n >= 1, "complete: n >= 1")
    lists = [[w for w in range(1, n + 1) if w != v] for v in range(1, n + 1)]
    return LabeledGraph(Graph.from_lists(lists))


def cycle(n: int) -> LabeledGraph:
    _need(n >= 3, "cycle: n >= 3")
    lists = [[(v - 2) % n + 1, v % n + 1] for v in range(1, n + 1)]
    return LabeledGraph(Graph.from_lists(lists))


def path(n: int) -> LabeledGraph:
    _need(n >= 2, "path: n >= 2")
    lists = [[w for w in (v - 1, v + 1) if 1 <= w <= n] for v in range(1, n + 1)]
    return LabeledGraph(Graph.from_lists(lists))


def star(leaves: int) -> LabeledGraph:
    _need(leaves >= 1, "star: at least one leaf")
    lists = [list(range(2, leaves + 2))] + [[1] for _ in range(leaves)]
    return LabeledGraph(Graph.from_lists(lists), {"center": [1], "leaves": list(range(2, leaves + 2))})


def double_star(k: int) -> LabeledGraph:
    _need(k >= 1, "double_star: k >= 1")
    L1 = list(range(3, k + 3))
    L2 = list(range(k + 3, 2 * k + 3))
    lists = [[2] + L1, [1] + L2] + [[1] for _ in L1] + [[2] for _ in L2]
    groups = {"x1": [1], "x2": [2], "L1": L1, "L2": L2}
    return LabeledGraph(Graph.from_lists(lists), groups)


def dir_suppressor(k: int, a: int) -> LabeledGraph:
    _need(k >= 2 and a >= 1, "dir_suppressor: k >= 2, a >= 1")
    ka = k * a

    def w(j: int) -> int:
        return j

    def v(i: int) -> int:
        return ka + i

    lists: list[list[int]] = [[] for _ in range(ka + k)]
    # cycle w_1 .. w_ka v_k .. v_1 w_1
    for j in range(1, ka):
        lists[w(j) - 1].append(w(j + 1))
    lists[w(ka) - 1].append(v(k))
    for i in range(k, 1, -1):
        lists[v(i) - 1].append(v(i - 1))
    lists[v(1) - 1].append(w(1))
    for i in range(1, k + 1):
        for j in range((i - 1) * a + 1, i * a + 1):
            if v(i) not in lists[w(j) - 1]:
                lists[w(j) - 1].append(v(i))
    groups: dict[str, list[int]] = {}
    for i in range(1, k + 1):
        groups[f"I{i}"] = list(range((i - 1) * a + 1, i * a + 1))
        groups[f"v{i}"] = [v(i)]
    for i in range(1, k + 1):
        W = list(range((i - 1) * a + 1, ka + 1))
        V = [v(j) for j in range(i, k + 1)]
        groups[f"W{i}"] = W
        groups[f"V{i}"] = V
        groups[f"X{i}"] = W + V
    groups[f"X{k + 1}"] = []
    return LabeledGraph(Graph.from_lists(lists, directed=True), groups)


def sigma_levels(a: int, k: int, r: Fraction) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    r = Fraction(r)
    s0 = r * (a * k + 1) / (k * (a * a * k - 1)) if a * a * k > 1 else None
    s2 = 2 * r + Fraction(k * a) * r * r / (a * a * k - 1) if a * a * k > 1 else None
    if s0 is None or s2 is None:
        raise FamilyParameterError("sigma weights need a^2 k > 1")
    return (s0, Fraction(1), s2, Fraction(k))


def undir_suppressor(a: int, k: int, r: Fraction | None = None) -> LabeledGraph:
    """H_{a,k}: K(V0, V1) + a^2 k disjoint k-leaf stars V2->V1 + matching V2-V3.

    Built directly in CSR form; for the default parameters the V0-V1 block has
    tens of millions of edges.
    """
    _need(a >= 1 and k >= 1, "undir_suppressor: a >= 1, k >= 1")
    n0, n1, n2 = a * k, a * a * k * k, a * a * k
    b = (0, n0, n0 + n1, n0 + n1 + n2, n0 + n1 + 2 * n2)
    n = b[4]
    deg = np.zeros(n + 1, dtype=np.int64)
    deg[b[0] + 1:b[1] + 1] = n1
    deg[b[1] + 1:b[2] + 1] = n0 + 1
    deg[b[2] + 1:b[3] + 1] = k + 1
    deg[b[3] + 1:b[4] + 1] = 1
    indptr = np.zeros(n + 2, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(int(indptr[-1]), dtype=np.int32)
    V1 = np.arange(b[1] + 1, b[2] + 1, dtype=np.int32)
    V0 = np.arange(b[0] + 1, b[1] + 1, dtype=np.int32)
    # V0 rows: all of V1
    indices[indptr[1]:indptr[b[1] + 1]] = np.tile(V1, n0)
    # V1 rows: all of V0, then the star centre
    blk = indices[indptr[b[1] + 1]:indptr[b[2] + 1]].reshape(n1, n0 + 1)
    blk[:, :n0] = V0
    blk[:, n0] = b[2] + 1 + np.arange(n1, dtype=np.int32) // k
    # V2 rows: k leaves, then matched V3 vertex
    blk = indices[indptr[b[2] + 1]:indptr[b[3] + 1]].reshape(n2, k + 1)
    blk[:, :k] = (b[1] + 1 + np.arange(n2 * k, dtype=np.int32)).reshape(n2, k)
    blk[:, k] = np.arange(b[3] + 1, b[4] + 1, dtype=np.int32)
    # V3 rows: matched V2 vertex
    indices[indptr[b[3] + 1]:indptr[b[4] + 1]] = np.arange(b[2] + 1, b[3] + 1, dtype=np.int32)
    g = Graph(False, n, indptr, indices)
    groups = {f"V{i}": list(range(b[i] + 1, b[i + 1] + 1)) for i in range(4)}
    sigma = None
    if r is not None and a * a * k > 1:
        sigma = SigmaWeights(Fraction(r), a, k, sigma_levels(a, k, Fraction(r)), b)
    return LabeledGraph(g, groups, sigma)


def random_connected(n: int, p: float, seed: int) -> LabeledGraph:
    """G(n, p) resampled until connected (at most RANDOM_RETRY_CAP draws)."""
    _need(n >= 1, "random_connected: n >= 1")
    _need(0 < p <= 1, "random_connected: 0 < p <= 1")
    rng = np.random.Generator(np.random.Philox(key=seed & (2**64 - 1)))
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(RANDOM_RETRY_CAP):
        keep = rng.random(len(iu)) < p
        edges = zip((iu[keep] + 1).tolist(), (ju[keep] + 1).tolist())
        g = Graph.from_edges(n, edges)
        if n == 1 or is_connected(g):
            return LabeledGraph(g)
    raise FamilyParameterError(f"random_connected: no connected sample in {RANDOM_RETRY_CAP} draws (n={n}, p={p})")


def generate(family: str, params: dict | None = None, seed: int | None = None) -> LabeledGraph:
    params = dict(params or {})
    if family == "complete":
        return complete(int(params["n"]))
    if family == "cycle":
        return cycle(int(params["n"]))
    if family == "path":
        return path(int(params["n"]))
    if family == "star":
        return star(int(params.get("k", params.get("n"))))
    if family == "double_star":
        return double_star(int(params["k"]))
    if family == "dir_suppressor":
        return dir_suppressor(int(params["k"]), int(params["a"]))
    if family == "undir_suppressor":
        return undir_suppressor(int(params["a"]), int(params["k"]), params.get("r"))
    if family == "random_connected":
        if seed is None:
            raise FamilyParameterError("random_connected needs a seed")
        return random_connected(int(params["n"]), float(params["p"]), seed)
    raise FamilyParameterError(f"unknown family {family!r}")


def default_dir_a(r) -> int:
    """a = ceil(4r), the directed-suppressor width used in the fixation bounds."""
    return math.ceil(4 * Fraction(r))


def default_undir_a(r) -> int:
    """a = ceil(7r^2/2)."""
    return math.ceil(Fraction(7) * Fraction(r) ** 2 / 2)


def save_groups(groups: dict[str, list[int]]) -> str:
    return "".join(f"{name}: {' '.join(map(str, ids))}\n".replace(": \n", ":\n") for name, ids in groups.items())


def load_groups(text: str) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        name, sep, rest = line.partition(":")
        if not sep:
            raise ValueError(f"group file line {lineno}: missing ':'")
        out[name.strip()] = [int(t) for t in rest.split()]
    return out


def sigma_potential(h: LabeledGraph, S) -> Fraction:
    """Sum of sigma weights over S (exact)."""
    if h.sigma is None:
        raise ValueError("graph carries no sigma weights; build it with undir_suppressor(a, k, r)")
    n = h.graph.n
    total = Fraction(0)
    for v in S:
        if not 1 <= v <= n:
            raise ValueError(f"vertex {v} outside 1..{n}")
        total += h.sigma[v]
    return total
