"""Exact small-graph oracle for the Moran process.

States are bitmasks over ``n <= 20`` vertices (bit ``v - 1`` for vertex ``v``).
Linear systems are written for the embedded jump chain, which has the same
absorption probabilities and no self-loops; absorption times add the expected
holding time ``W(S) / R(S)`` of every visited state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .families import LabeledGraph, SigmaWeights
from .graph import Graph, require_process_graph, to_mask
from .potential import VertexClasses, WeightFunction, ProcessConstants, membership, phi

STATE_CAP = 20
DIRECT_SOLVE_CAP = 10
EXACT_RATIONAL_CAP = 8
RATIONAL_DENOMINATOR_CAP = 10**6

Start = Literal["uniform"] | int | Iterable[int]


def as_rational(x) -> Fraction:
    """Exact rational from int, Fraction, 'p/q' or decimal string; floats are
    rationalised with denominator at most 10**6."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(RATIONAL_DENOMINATOR_CAP)
    return Fraction(str(x).strip())


def _state_count_check(g: Graph) -> None:
    if g.n > STATE_CAP:
        raise ValueError(f"exact solver is capped at n = {STATE_CAP} (got {g.n})")


def _start_mask(g: Graph, start) -> int | None:
    if isinstance(start, str):
        if start != "uniform":
            raise ValueError(f"unknown start {start!r}")
        return None
    if isinstance(start, (int, np.integer)):
        if not 1 <= start <= g.n:
            raise ValueError(f"vertex {start} outside 1..{g.n}")
        return 1 << (int(start) - 1)
    s = frozenset(start)
    if any(not 1 <= v <= g.n for v in s):
        raise ValueError("start set has ids outside the graph")
    return to_mask(s)


# ---------------------------------------------------------------------------
# one-step quantities


def transition_distribution(g: Graph, r, S: Iterable[int]) -> dict[frozenset[int], Fraction]:
    """Exact law of M(t+1) given M(t) = S, including the idle outcome."""
    r = as_rational(r)
    if r <= 0:
        raise ValueError("r must be positive")
    s = frozenset(S)
    if not s or len(s) == g.n:
        raise ValueError("state is absorbing")
    W = g.n + (r - 1) * len(s)
    adj = g.adjacency
    deg = g.degree_list
    out: dict[frozenset[int], Fraction] = {}
    stay = Fraction(0)
    for x in g.vertices():
        fit = r if x in s else Fraction(1)
        p = fit / (W * deg[x])
        for y in adj[x]:
            if (x in s) == (y in s):
                stay += p
            else:
                nxt = s | {y} if x in s else s - {y}
                out[nxt] = out.get(nxt, Fraction(0)) + p
    if stay:
        out[s] = out.get(s, Fraction(0)) + stay
    return out


def active_transition_distribution(g: Graph, r, S: Iterable[int]) -> dict[frozenset[int], Fraction]:
    """Law of the next state conditioned on the state changing."""
    s = frozenset(S)
    dist = transition_distribution(g, r, s)
    dist.pop(s, None)
    total = sum(dist.values())
    return {t: p / total for t, p in dist.items()}


def active_phi_gain(g: Graph, r, S: Iterable[int]) -> Fraction:
    """E[phi(next) - phi(S) | next != S], exact."""
    s = frozenset(S)
    base = phi(g, s)
    return sum((p * (phi(g, t) - base) for t, p in active_transition_distribution(g, r, s).items()), Fraction(0))


def active_spawner_distribution(g: Graph, r, S: Iterable[int]) -> dict[int, Fraction]:
    """Law of the spawning vertex conditioned on an active step.

    Mutant w has weight r d_bdry(w)/d(w), non-mutant w has d_bdry(w)/d(w).
    """
    r = as_rational(r)
    s = frozenset(S)
    if not s or len(s) == g.n:
        raise ValueError("state is absorbing")
    adj = g.adjacency
    deg = g.degree_list
    weights = {}
    for w in g.vertices():
        mut = w in s
        bdry = sum(1 for y in adj[w] if (y in s) != mut)
        weights[w] = (r if mut else 1) * Fraction(bdry, deg[w])
    total = sum(weights.values())
    if total == 0:
        raise ValueError("no boundary edges")
    return {w: x / total for w, x in weights.items()}


@dataclass(frozen=True)
class OneStepExpectation:
    kind: str
    value: Fraction | float


def _potential_classes(g: Graph, kind: str, context) -> VertexClasses:
    if kind == "phi":
        return VertexClasses.inverse_degree(g)
    if kind == "phi_f":
        if not isinstance(context, WeightFunction):
            raise ValueError("kind phi_f needs a WeightFunction")
        return VertexClasses.from_values(context.phi_values)
    if kind == "sigma":
        if isinstance(context, LabeledGraph):
            context = context.sigma
        if not isinstance(context, SigmaWeights):
            raise ValueError("kind sigma needs SigmaWeights")
        ids = np.zeros(g.n + 1, dtype=np.int64)
        b = context.bounds
        for i in range(4):
            ids[b[i] + 1:b[i + 1] + 1] = i + 1
        return VertexClasses(ids, [Fraction(0), *context.levels])
    raise ValueError(f"unknown kind {kind!r}")


def one_step_expected_change(g: Graph, r, S: Iterable[int], kind: str = "phi", context=None) -> OneStepExpectation:
    """E[Pot(M(t+1)) - Pot(M(t)) | M(t) = S] by summing over boundary edges only.

    For a vertex potential ``val`` the boundary pair (x, y), x in S, contributes
    ``r val(y)/d(x) - val(x)/d(y)``, all divided by W(S).
    """
    if g.directed:
        raise ValueError("potential expectations are for undirected graphs")
    r = as_rational(r)
    s = frozenset(S)
    if kind == "psi_f":
        return OneStepExpectation(kind, _psi_step(g, r, s, context))
    classes = _potential_classes(g, kind, context)
    inv = VertexClasses.inverse_degree(g)
    inside = membership(g, s)
    deg = g.degree
    total = Fraction(0)
    for x in s:
        nb = g.neighbors(x)
        outside = nb[~inside[nb]]
        if not len(outside):
            continue
        val_x = classes.values[classes.class_of[x]]
        total += r * classes.total(outside) / int(deg[x]) - val_x * inv.total(outside)
    W = g.n + (r - 1) * len(s)
    return OneStepExpectation(kind, total / W)


def _psi_step(g: Graph, r: Fraction, s: frozenset[int], f) -> float:
    if not isinstance(f, WeightFunction):
        raise ValueError("kind psi_f needs a WeightFunction")
    consts = ProcessConstants(r)
    if r <= 1:
        raise ValueError("psi_f needs r > 1")
    if f.m_f == 0:
        raise ValueError("psi_f needs a weight function that is not everywhere zero")
    c = float(consts.beta / f.m_f)
    pv = f.phi_values
    adj = g.adjacency
    deg = g.degree_list
    rf = float(r)
    terms = []
    for x in s:
        for y in adj[x]:
            if y in s:
                continue
            terms.append(rf / deg[x] * math.expm1(-c * float(pv[y])))
            terms.append(1.0 / deg[y] * math.expm1(c * float(pv[x])))
    W = float(g.n + (r - 1) * len(s))
    base = math.exp(-c * float(sum((pv[v] for v in s), Fraction(0))))
    return base * math.fsum(terms) / W


# ---------------------------------------------------------------------------
# linear systems over the whole lattice


@dataclass
class JumpChain:
    n: int
    jump: sp.csr_matrix  # transient -> transient jump probabilities (index = mask - 1)
    to_full: np.ndarray  # jump probability into the all-mutant state
    holding: np.ndarray  # expected steps spent per visit, W(S)/R(S)


def _arcs(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    src = np.repeat(np.arange(g.n + 1), np.diff(g.indptr))
    return src.astype(np.int64), g.indices.astype(np.int64)


def build_jump_chain(g: Graph, r: float) -> JumpChain:
    _state_count_check(g)
    n = g.n
    full = (1 << n) - 1
    masks = np.arange(1, full, dtype=np.int64)
    src, dst = _arcs(g)
    deg = g.degree.astype(float)
    rows, cols, vals = [], [], []
    rate_total = np.zeros(len(masks))
    to_full = np.zeros(len(masks))
    for x, y in zip(src.tolist(), dst.tolist()):
        bx = (masks >> (x - 1)) & 1
        by = (masks >> (y - 1)) & 1
        moving = bx != by
        idx = np.flatnonzero(moving)
        if not len(idx):
            continue
        rate = np.where(bx[idx] == 1, r, 1.0) / deg[x]
        nxt = masks[idx] ^ (1 << (y - 1))
        rate_total[idx] += rate
        at_full = nxt == full
        to_full[idx[at_full]] += rate[at_full]
        keep = (nxt != 0) & ~at_full
        rows.append(idx[keep])
        cols.append(nxt[keep] - 1)
        vals.append(rate[keep])
    rows_a = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols_a = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals_a = np.concatenate(vals) if vals else np.zeros(0)
    if np.any(rate_total == 0):
        raise ValueError("some non-absorbing state cannot move; graph is not (strongly) connected")
    vals_a = vals_a / rate_total[rows_a]
    m = len(masks)
    jump = sp.csr_matrix((vals_a, (rows_a, cols_a)), shape=(m, m))
    pop = np.bitwise_count(masks).astype(float)
    W = n + (r - 1) * pop
    return JumpChain(n, jump, to_full / rate_total, W / rate_total)


def _solve(chain: JumpChain, b: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    m = chain.jump.shape[0]
    A = (sp.identity(m, format="csr") - chain.jump).tocsc()
    if chain.n <= DIRECT_SOLVE_CAP:
        x = np.atleast_1d(spla.spsolve(A, b))
    else:
        # LU fill-in explodes on the subset lattice; Krylov converges in a few hundred iterations
        x, info = spla.bicgstab(A, b, rtol=1e-15, atol=0.0, maxiter=100_000)
        if info != 0 or np.max(np.abs(A @ x - b)) > tol:
            ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
            pre = spla.LinearOperator(A.shape, ilu.solve)
            x, info = spla.gmres(A, b, x0=x, M=pre, rtol=1e-15, atol=0.0, restart=100, maxiter=1000)
    residual = float(np.max(np.abs(A @ x - b))) if m else 0.0
    if residual > tol * max(1.0, float(np.max(np.abs(x)))):
        raise RuntimeError(f"linear solve residual {residual:.3g} above tolerance")
    return x, residual


@dataclass(frozen=True)
class ExactResult:
    value: float
    residual: float
    n_states: int
    rational: Fraction | None = None


def fixation_vector(g: Graph, r) -> tuple[np.ndarray, float]:
    """h[mask] = fixation probability from every state, with the solve residual."""
    require_process_graph(g)
    r = as_rational(r)
    chain = build_jump_chain(g, float(r))
    h_t, residual = _solve(chain, chain.to_full, 1e-12)
    h = np.empty(1 << g.n)
    h[0], h[-1] = 0.0, 1.0
    h[1:-1] = h_t
    return h, residual


def absorption_vector(g: Graph, r) -> tuple[np.ndarray, float]:
    require_process_graph(g)
    r = as_rational(r)
    chain = build_jump_chain(g, float(r))
    t_t, residual = _solve(chain, chain.holding, 1e-10)
    t = np.zeros(1 << g.n)
    t[1:-1] = t_t
    return t, residual


def _average_over_start(g: Graph, vec, start):
    mask = _start_mask(g, start)
    if mask is None:
        return sum(vec[1 << (v - 1)] for v in range(1, g.n + 1)) / g.n
    return vec[mask]


def fixation_probability_exact(g: Graph, r, start: Start = "uniform", exact: bool = False) -> ExactResult:
    h, residual = fixation_vector(g, r)
    value = float(_average_over_start(g, h, start))
    rational = None
    if exact:
        hq = fixation_vector_rational(g, r)
        rational = _average_over_start(g, hq, start)
    return ExactResult(value, residual, 1 << g.n, rational)


def absorption_time_exact(g: Graph, r, start: Start = "uniform") -> ExactResult:
    t, residual = absorption_vector(g, r)
    return ExactResult(float(_average_over_start(g, t, start)), residual, 1 << g.n)


def fixation_vector_rational(g: Graph, r) -> list[Fraction]:
    """Exact fixation probabilities from every mask via rational elimination (n <= 8)."""
    import flint

    require_process_graph(g)
    if g.n > EXACT_RATIONAL_CAP:
        raise ValueError(f"exact rational solve is capped at n = {EXACT_RATIONAL_CAP}")
    r = as_rational(r)
    n = g.n
    full = (1 << n) - 1
    m = full - 1
    adj = g.adjacency
    deg = g.degree_list
    A = flint.fmpq_mat(m, m)
    b = flint.fmpq_mat(m, 1)
    for s in range(1, full):
        i = s - 1
        row: dict[int, Fraction] = {}
        total = Fraction(0)
        for x in range(1, n + 1):
            xm = s >> (x - 1) & 1
            for y in adj[x]:
                if xm == (s >> (y - 1) & 1):
                    continue
                rate = (r if xm else Fraction(1)) / deg[x]
                total += rate
                nxt = s ^ (1 << (y - 1))
                row[nxt] = row.get(nxt, Fraction(0)) + rate
        A[i, i] = flint.fmpq(1)
        for nxt, rate in row.items():
            p = rate / total
            if nxt == full:
                b[i, 0] = b[i, 0] + flint.fmpq(p.numerator, p.denominator)
            elif nxt:
                A[i, nxt - 1] = A[i, nxt - 1] - flint.fmpq(p.numerator, p.denominator)
    x = A.solve(b)
    out = [Fraction(0)] * (full + 1)
    out[full] = Fraction(1)
    for i in range(m):
        q = x[i, 0]
        out[i + 1] = Fraction(int(q.p), int(q.q))
    return out


def clique_fixation(n: int, r) -> Fraction:
    """(1 - 1/r) / (1 - 1/r^n), or 1/n at r = 1."""
    r = as_rational(r)
    if r == 1:
        return Fraction(1, n)
    return (1 - 1 / r) / (1 - r ** (-n))

