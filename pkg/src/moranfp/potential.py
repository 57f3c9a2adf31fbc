"""Exact potential and drift calculus on undirected graphs.

All sums are ``Fraction``-valued; floats only appear in ``psi_weighted`` and the
barrier threshold, where exponentials force them.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .graph import Graph

MIN_DRIFT_CAP = 24
BARRIER_GUARD = 1e-12


def _undirected(g: Graph) -> None:
    if g.directed:
        raise ValueError("potential functions are defined for undirected graphs only")


def _check_ids(g: Graph, S: Iterable[int]) -> frozenset[int]:
    s = frozenset(S)
    for v in s:
        if not 1 <= v <= g.n:
            raise ValueError(f"vertex {v} outside 1..{g.n}")
    return s


def membership(g: Graph, S: Iterable[int]) -> np.ndarray:
    inside = np.zeros(g.n + 1, dtype=bool)
    ids = np.fromiter(S, dtype=np.int64)
    inside[ids] = True
    return inside


class VertexClasses:
    """Groups vertices by an exact per-vertex value so neighbourhood sums can be
    done with ``bincount`` followed by a handful of Fraction operations."""

    def __init__(self, class_of: np.ndarray, values: Sequence[Fraction]):
        self.class_of = class_of
        self.values = list(values)

    @classmethod
    def from_values(cls, vals: Sequence[Fraction]) -> "VertexClasses":
        index: dict[Fraction, int] = {}
        ids = np.empty(len(vals), dtype=np.int64)
        for v, x in enumerate(vals):
            ids[v] = index.setdefault(x, len(index))
        values = [Fraction(0)] * len(index)
        for x, i in index.items():
            values[i] = x
        return cls(ids, values)

    @classmethod
    def inverse_degree(cls, g: Graph) -> "VertexClasses":
        deg = g.degree
        values = [Fraction(1, d) if d else Fraction(0) for d in range(int(deg.max()) + 1)]
        return cls(deg.astype(np.int64), values)

    def total(self, vertices: np.ndarray) -> Fraction:
        if len(vertices) == 0:
            return Fraction(0)
        counts = np.bincount(self.class_of[vertices], minlength=len(self.values))
        nz = np.flatnonzero(counts)
        return sum((int(counts[i]) * self.values[i] for i in nz.tolist()), Fraction(0))


@dataclass(frozen=True)
class ProcessConstants:
    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "r", Fraction(self.r))
        if self.r <= 0:
            raise ValueError("fitness r must be positive")

    @property
    def lambda_(self) -> Fraction:
        return (self.r + 1) / 2

    @property
    def beta(self) -> Fraction:
        return (self.r - 1) / (6 * self.r + 2)


class WeightFunction:
    """Non-negative rational weight ``f[v]`` per vertex of a fixed graph."""

    def __init__(self, g: Graph, f: Sequence):
        if len(f) == g.n:
            f = [0, *f]
        if len(f) != g.n + 1:
            raise ValueError("weight function needs one value per vertex")
        self.graph = g
        self.f = [Fraction(0)] + [Fraction(x) for x in list(f)[1:]]
        if any(x < 0 for x in self.f):
            raise ValueError("weights must be non-negative")

    @classmethod
    def constant(cls, g: Graph, c=1) -> "WeightFunction":
        return cls(g, [0] + [c] * g.n)

    def __getitem__(self, v: int) -> Fraction:
        return self.f[v]

    @cached_property
    def m_f(self) -> Fraction:
        deg = self.graph.degree_list
        return max(self.f[v] / deg[v] for v in self.graph.vertices())

    @cached_property
    def phi_values(self) -> list[Fraction]:
        deg = self.graph.degree_list
        return [Fraction(0)] + [self.f[v] / deg[v] for v in self.graph.vertices()]


def phi(g: Graph, S: Iterable[int]) -> Fraction:
    _undirected(g)
    s = _check_ids(g, S)
    deg = g.degree
    total = Fraction(0)
    for v in s:
        d = int(deg[v])
        if d == 0:
            raise ValueError(f"vertex {v} is isolated")
        total += Fraction(1, d)
    return total


def drift(g: Graph, A: Iterable[int], B: Iterable[int]) -> Fraction:
    """Sum over edges xy with x in A, y in B of 1/(d(x) d(y))."""
    _undirected(g)
    a, b = _check_ids(g, A), _check_ids(g, B)
    if a & b:
        raise ValueError("drift arguments must be disjoint")
    if not a or not b:
        return Fraction(0)
    if len(b) < len(a):
        a, b = b, a
    inside = membership(g, b)
    inv = VertexClasses.inverse_degree(g)
    deg = g.degree
    total = Fraction(0)
    for x in a:
        nb = g.neighbors(x)
        hit = nb[inside[nb]]
        if len(hit):
            total += inv.total(hit) / int(deg[x])
    return total


def cut_drift(g: Graph, S: Iterable[int]) -> Fraction:
    """drift(S, V \\ S) without materialising the complement."""
    _undirected(g)
    s = _check_ids(g, S)
    inside = membership(g, s)
    inv = VertexClasses.inverse_degree(g)
    deg = g.degree
    total = Fraction(0)
    for x in s:
        nb = g.neighbors(x)
        out = nb[~inside[nb]]
        if len(out):
            total += inv.total(out) / int(deg[x])
    return total


def phi_weighted(g: Graph, f: WeightFunction, S: Iterable[int]) -> Fraction:
    _undirected(g)
    s = _check_ids(g, S)
    deg = g.degree
    total = Fraction(0)
    for v in s:
        d = int(deg[v])
        if d == 0:
            raise ValueError(f"vertex {v} is isolated")
        total += f[v] / d
    return total


def psi_exponent(g: Graph, consts: ProcessConstants, f: WeightFunction, S: Iterable[int]) -> Fraction:
    if consts.r <= 1:
        raise ValueError("psi_f needs r > 1")
    if f.m_f == 0:
        raise ValueError("psi_f needs a weight function that is not everywhere zero")
    return phi_weighted(g, f, S) * consts.beta / f.m_f


def psi_weighted(g: Graph, consts: ProcessConstants, f: WeightFunction, S: Iterable[int]) -> float:
    """exp(-phi_f(S) beta / m_f), exponent kept exact until the final exp."""
    return math.exp(-float(psi_exponent(g, consts, f, S)))


@dataclass(frozen=True)
class Validity:
    valid: bool
    forward_excess: Fraction  # sum over f(x) > lambda f(y) of f(x)/(d(x)d(y))
    backed: Fraction  # (r-1)/4r * sum over f(x) <= lambda f(y) of f(y)/(d(x)d(y))

    def __bool__(self) -> bool:
        return self.valid


def is_valid_for(g: Graph, consts: ProcessConstants, f: WeightFunction, X: Iterable[int]) -> Validity:
    _undirected(g)
    if consts.r <= 1:
        raise ValueError("validity needs r > 1")
    x_set = _check_ids(g, X)
    lam = consts.lambda_
    adj = g.adjacency
    deg = g.degree_list
    left = Fraction(0)
    right = Fraction(0)
    for x in x_set:
        for y in adj[x]:
            if y in x_set:
                continue
            if f[x] > lam * f[y]:
                left += f[x] / (deg[x] * deg[y])
            else:
                right += f[y] / (deg[x] * deg[y])
    right = (consts.r - 1) / (4 * consts.r) * right
    return Validity(left <= right, left, right)


# ---------------------------------------------------------------------------
# barriers


def log_rho(n: int, consts: ProcessConstants) -> float:
    """Natural log of rho(n) = (10r/(r-1)) exp((10/log(lambda) * log log n)^3 log r)."""
    r = consts.r
    if r <= 1:
        raise ValueError("barrier threshold needs r > 1")
    if n < 3:
        raise ValueError("barrier threshold needs n >= 3")
    rf = float(r)
    inner = 10.0 / math.log(float(consts.lambda_)) * math.log(math.log(n))
    return math.log(10 * rf / (rf - 1)) + inner**3 * math.log(rf)


def barrier_threshold(n: int, consts: ProcessConstants) -> float:
    """rho(n) as a float; ``inf`` once it leaves the float64 range (n >= 10 at r = 2)."""
    lr = log_rho(n, consts)
    try:
        return math.exp(lr)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class BarrierCheck:
    is_barrier: bool
    borderline: bool
    drift: Fraction
    log_threshold: float  # log of 1/(2 n rho(n))


def barrier_check(g: Graph, consts: ProcessConstants, S: Iterable[int]) -> BarrierCheck:
    s = _check_ids(g, S)
    if not s or len(s) == g.n:
        raise ValueError("barrier candidates must be non-empty proper subsets")
    d = cut_drift(g, s)
    log_thr = -math.log(2 * g.n) - log_rho(g.n, consts)
    if d == 0:
        return BarrierCheck(True, False, d, log_thr)
    log_d = math.log(d.numerator) - math.log(d.denominator)
    gap = log_d - log_thr
    return BarrierCheck(gap < 0, abs(gap) <= BARRIER_GUARD * max(1.0, abs(log_thr)), d, log_thr)


def is_barrier(g: Graph, consts: ProcessConstants, S: Iterable[int]) -> bool:
    return barrier_check(g, consts, S).is_barrier


# ---------------------------------------------------------------------------
# core subset R(G, U)


def core_subset(g: Graph, U: Iterable[int]) -> frozenset[int]:
    """Greedy min-degree deletion inside G[U] with the fixed threshold d(G[U])/2.

    Deletes the least id among minimum-degree vertices while some vertex of the
    current induced subgraph has degree below the threshold.
    """
    _undirected(g)
    u = _check_ids(g, U)
    if not u:
        raise ValueError("core_subset needs a non-empty U")
    adj = g.adjacency
    ideg = {v: sum(1 for w in adj[v] if w in u) for v in u}
    threshold = Fraction(sum(ideg.values()), 2 * len(u))
    alive = set(u)
    heap = [(d, v) for v, d in ideg.items()]
    heapq.heapify(heap)
    while heap:
        d, v = heap[0]
        if v not in alive or ideg[v] != d:
            heapq.heappop(heap)
            continue
        if d >= threshold:
            break
        heapq.heappop(heap)
        alive.discard(v)
        for w in adj[v]:
            if w in alive:
                ideg[w] -= 1
                heapq.heappush(heap, (ideg[w], w))
    return frozenset(alive)


def induced_min_degree(g: Graph, R: Iterable[int]) -> int:
    r = frozenset(R)
    adj = g.adjacency
    return min(sum(1 for w in adj[v] if w in r) for v in r)


def induced_average_degree(g: Graph, U: Iterable[int]) -> Fraction:
    u = frozenset(U)
    adj = g.adjacency
    return Fraction(sum(1 for v in u for w in adj[v] if w in u), len(u))


# ---------------------------------------------------------------------------
# exhaustive minimum-drift search


def min_drift_subset(g: Graph, restrict: Iterable[int] | None = None) -> tuple[frozenset[int], Fraction]:
    """Proper non-empty S (within ``restrict`` if given) minimising drift(S, V \\ S).

    Ties: smallest |S|, then smallest vertex bitmask.
    """
    _undirected(g)
    pool = sorted(_check_ids(g, restrict)) if restrict is not None else list(g.vertices())
    k = len(pool)
    if k > MIN_DRIFT_CAP:
        raise ValueError(f"exhaustive search capped at {MIN_DRIFT_CAP} vertices (got {k})")
    if k == 0:
        raise ValueError("empty search pool")
    deg = g.degree_list
    edges = g.edges()
    L = 1
    for x, y in edges:
        L = math.lcm(L, deg[x] * deg[y])
    local = {v: i for i, v in enumerate(pool)}
    weights = []
    bits = []
    for x, y in edges:
        ix, iy = local.get(x), local.get(y)
        if ix is None and iy is None:
            continue
        weights.append(L // (deg[x] * deg[y]))
        bits.append((ix, iy))
    if sum(weights) >= 2**62:
        raise ValueError("scaled drift weights overflow int64")
    full = (1 << k) - 1
    proper_full = restrict is None or k == g.n
    best: tuple[int, int, int] | None = None
    chunk = 1 << 20
    for start in range(1, full + 1, chunk):
        masks = np.arange(start, min(start + chunk, full + 1), dtype=np.int64)
        if proper_full and masks[-1] == full:
            masks = masks[:-1]
        if not len(masks):
            continue
        acc = np.zeros(len(masks), dtype=np.int64)
        for w, (ix, iy) in zip(weights, bits):
            bx = (masks >> ix) & 1 if ix is not None else 0
            by = (masks >> iy) & 1 if iy is not None else 0
            acc += w * (bx ^ by)
        lo = acc.min()
        cand = masks[acc == lo]
        pops = np.bitwise_count(cand)
        cand = cand[pops == pops.min()]
        entry = (int(lo), int(pops.min()), int(cand.min()))
        if best is None or entry < best:
            best = entry
    assert best is not None
    value, _, lmask = best
    chosen = frozenset(pool[i] for i in range(k) if lmask >> i & 1)
    return chosen, Fraction(value, L)
