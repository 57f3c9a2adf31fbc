"""Graph representation and the ``moran-graph v1`` text format.

Vertices are the integers ``1..n``. Adjacency is stored in CSR form with a
dummy row for index 0, so ``indices[indptr[v]:indptr[v + 1]]`` is the ordered
neighbour list of ``v`` (out-neighbours for digraphs).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

HEADER = "moran-graph v1"

MutantSet = frozenset


class GraphFormatError(ValueError):
    """Malformed graph document."""


class GraphConsistencyError(ValueError):
    """Declared counts disagree with the adjacency lists, or a structural invariant fails."""


@dataclass(frozen=True, eq=False)
class Graph:
    directed: bool
    n: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)

    @classmethod
    def from_lists(cls, lists: Sequence[Sequence[int]], directed: bool = False, check: bool = True) -> "Graph":
        """Build from ``lists[v - 1]`` = neighbours of ``v``."""
        n = len(lists)
        lengths = np.fromiter((len(a) for a in lists), dtype=np.int64, count=n)
        indptr = np.zeros(n + 2, dtype=np.int64)
        np.cumsum(lengths, out=indptr[2:])
        if indptr[-1]:
            indices = np.fromiter((w for a in lists for w in a), dtype=np.int32, count=int(indptr[-1]))
        else:
            indices = np.zeros(0, dtype=np.int32)
        g = cls(directed, n, indptr, indices)
        if check:
            problems = structural_violations(g)
            if problems:
                raise GraphConsistencyError("; ".join(problems))
        return g

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], directed: bool = False) -> "Graph":
        lists: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            lists[u - 1].append(v)
            if not directed:
                lists[v - 1].append(u)
        return cls.from_lists(lists, directed=directed)

    @cached_property
    def degree(self) -> np.ndarray:
        """Out-degree per vertex, index 0 unused (= 0)."""
        return np.diff(self.indptr)

    @cached_property
    def m(self) -> int:
        total = int(self.indptr[-1])
        return total if self.directed else total // 2

    @cached_property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.n else 0

    @cached_property
    def min_degree(self) -> int:
        return int(self.degree[1:].min()) if self.n else 0

    @cached_property
    def adjacency(self) -> list[list[int]]:
        """Python lists, ``adjacency[v]`` for v in 1..n; ``adjacency[0] == []``."""
        flat = self.indices.tolist()
        ptr = self.indptr.tolist()
        return [flat[ptr[v]:ptr[v + 1]] for v in range(self.n + 1)]

    @cached_property
    def in_adjacency(self) -> list[list[int]]:
        """In-neighbour lists; identical to ``adjacency`` for undirected graphs."""
        if not self.directed:
            return self.adjacency
        inn: list[list[int]] = [[] for _ in range(self.n + 1)]
        for v, nbrs in enumerate(self.adjacency):
            for w in nbrs:
                inn[w].append(v)
        return inn

    @cached_property
    def degree_list(self) -> list[int]:
        return self.degree.tolist()

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def vertices(self) -> range:
        return range(1, self.n + 1)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected: each edge once as (u, v) with u < v. Directed: every arc."""
        out = []
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if self.directed or u < v:
                    out.append((u, v))
        return out

    def _scipy(self) -> csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int8)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n + 1, self.n + 1))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.directed == other.directed
            and self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None  # type: ignore[assignment]


def to_mask(members: Iterable[int]) -> int:
    mask = 0
    for v in members:
        mask |= 1 << (v - 1)
    return mask


def from_mask(mask: int) -> frozenset[int]:
    out = []
    v = 1
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return frozenset(out)


def mutant_set(g: Graph, members: Iterable[int]) -> frozenset[int]:
    s = frozenset(int(v) for v in members)
    bad = [v for v in s if not 1 <= v <= g.n]
    if bad:
        raise ValueError(f"vertex ids outside 1..{g.n}: {sorted(bad)}")
    return s


# ---------------------------------------------------------------------------
# validation


def structural_violations(g: Graph) -> list[str]:
    """Every Graph invariant failure, as human-readable strings."""
    out: list[str] = []
    n = g.n
    if n < 1:
        out.append("n must be >= 1")
        return out
    if len(g.indptr) != n + 2 or g.indptr[0] != 0 or g.indptr[1] != 0:
        out.append("malformed row pointer")
        return out
    idx = g.indices.astype(np.int64)
    if len(idx) and (idx.min() < 1 or idx.max() > n):
        out.append("neighbour id outside 1..n")
        return out
    rows = np.repeat(np.arange(n + 1, dtype=np.int64), np.diff(g.indptr))
    loops = np.unique(rows[idx == rows])
    for v in loops.tolist():
        out.append(f"self-loop at {v}")
    key = rows * (n + 1) + idx
    skey = np.sort(key)
    dup = np.unique(skey[1:][skey[1:] == skey[:-1]])
    for k in dup.tolist():
        out.append(f"duplicate neighbour {k % (n + 1)} of {k // (n + 1)}")
    if not g.directed:
        rev = np.sort(idx * (n + 1) + rows)
        if len(skey) != len(rev) or not np.array_equal(np.unique(skey), np.unique(rev)):
            missing = np.setdiff1d(skey, rev)[:5]
            for k in missing.tolist():
                u, v = k // (n + 1), k % (n + 1)
                out.append(f"asymmetric edge {u}-{v}")
            if not len(missing):
                out.append("asymmetric adjacency")
        elif len(skey) % 2:
            out.append("odd degree sum in undirected graph")
    return out


@dataclass
class ValidationReport:
    connected: bool
    strongly_connected: bool | None
    invariant_violations: list[str]


def _reach(mat: csr_matrix, start: int) -> int:
    order = breadth_first_order(mat, start, directed=True, return_predecessors=False)
    return len(order)


def validate(g: Graph) -> ValidationReport:
    violations = structural_violations(g)
    if g.n == 1:
        return ValidationReport(True, True if g.directed else None, violations)
    mat = g._scipy()
    if g.directed:
        both = (mat + mat.T).tocsr()
        connected = _reach(both, 1) == g.n
        strong = connected and _reach(mat, 1) == g.n and _reach(mat.T.tocsr(), 1) == g.n
        return ValidationReport(connected, strong, violations)
    return ValidationReport(_reach(mat, 1) == g.n, None, violations)


def is_connected(g: Graph) -> bool:
    """Connected (undirected) or strongly connected (directed)."""
    rep = validate(g)
    return bool(rep.strongly_connected) if g.directed else rep.connected


def require_process_graph(g: Graph) -> None:
    if g.n < 2:
        raise ValueError("process operations need at least two vertices")
    if not is_connected(g):
        kind = "strongly connected" if g.directed else "connected"
        raise ValueError(f"graph must be {kind}")


def average_degree(g: Graph) -> Fraction:
    return Fraction(int(g.indptr[-1]), g.n)


# ---------------------------------------------------------------------------
# text format


def save_graph(g: Graph) -> str:
    buf = io.StringIO()
    buf.write(f"{HEADER}\n")
    buf.write(f"directed {int(g.directed)}\n")
    buf.write(f"{g.n} {g.m} {g.max_degree}\n")
    for v in g.vertices():
        nbrs = g.neighbors(v).tolist()
        buf.write(f"{v}: {len(nbrs)}")
        if nbrs:
            buf.write(" " + " ".join(map(str, nbrs)))
        buf.write("\n")
    return buf.getvalue()


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise GraphFormatError(f"line {lineno}: expected integers, got {' '.join(tokens)!r}") from None


def load_graph(text: str | bytes) -> Graph:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3:
        raise GraphFormatError("document too short")
    if lines[0].strip() != HEADER:
        raise GraphFormatError(f"line 1: expected {HEADER!r}")
    parts = lines[1].split()
    if len(parts) != 2 or parts[0] != "directed" or parts[1] not in ("0", "1"):
        raise GraphFormatError("line 2: expected 'directed <0|1>'")
    directed = parts[1] == "1"
    head = _ints(lines[2].split(), 3)
    if len(head) != 3:
        raise GraphFormatError("line 3: expected '<n> <m> <delta>'")
    n, m, delta = head
    if n < 1:
        raise GraphFormatError("line 3: n must be >= 1")
    if len(lines) != n + 3:
        raise GraphFormatError(f"expected {n} adjacency lines, found {len(lines) - 3}")
    lists: list[list[int]] = []
    for i in range(n):
        lineno = i + 4
        label, sep, rest = lines[lineno - 1].partition(":")
        if not sep:
            raise GraphFormatError(f"line {lineno}: missing ':'")
        (v,) = _ints([label.strip()], lineno) if label.strip() else (None,)
        if v != i + 1:
            raise GraphFormatError(f"line {lineno}: expected vertex {i + 1}")
        nums = _ints(rest.split(), lineno)
        if not nums:
            raise GraphFormatError(f"line {lineno}: missing degree")
        d, nbrs = nums[0], nums[1:]
        if d != len(nbrs):
            raise GraphConsistencyError(f"vertex {v}: declared degree {d}, list has {len(nbrs)}")
        lists.append(nbrs)
    g = Graph.from_lists(lists, directed=directed, check=True)
    if g.m != m:
        raise GraphConsistencyError(f"declared m={m}, lists give {g.m}")
    if g.max_degree != delta:
        raise GraphConsistencyError(f"declared delta={delta}, lists give {g.max_degree}")
    return g
