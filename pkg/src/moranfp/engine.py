"""Naive and active-step Moran samplers.

The active sampler keeps the boundary structure described for the active
process: an integer-scaled potential ``phi_scaled = phi(M) * D`` where ``D`` is
lcm(1..max degree), a mutant index, a vertex -> slot map and a slot array of
boundary vertices kept between one-third and two-thirds full.

There are two backends with identical semantics and identical consumption of
the uniform stream:

* ``ActiveState`` / ``NaiveState``: pure Python, big-integer ``phi_scaled``,
  used for tracing, auditing and graphs whose ``n * D`` overflows int64.
* numba kernels (``_active_runs``, ``_naive_runs``): used for bulk runs.

Draw protocol for one active step: repeat {slot = index(size); if occupied,
accept with u < d/d_v (mutant) or u < d/(r d_v)}; then target = index(d_bdry)
among opposite-type neighbours in adjacency order. Naive step: class draw,
member draw, neighbour draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Callable, Iterable

import numpy as np
from numba import njit

from .graph import Graph, require_process_graph
from .rng import UniformStream, block_generator, block_uniforms

REJECTION_CAP_FACTOR = 10**6
INT64_SAFE = (1 << 62)
FOREVER = (1 << 62)

# kernel status codes
OK, EXHAUSTED, OVER_BUDGET, REJECTION_CAP = 0, 1, 2, 3
# kernel result codes
RES_EXTINCTION, RES_FIXATION, RES_THRESHOLD, RES_CAPPED = 0, 1, 2, 3


class Result(str, Enum):
    fixation = "fixation"
    extinction = "extinction"
    threshold_reached = "threshold_reached"
    step_capped = "step_capped"


_RESULT_OF_CODE = {
    RES_EXTINCTION: Result.extinction,
    RES_FIXATION: Result.fixation,
    RES_THRESHOLD: Result.threshold_reached,
    RES_CAPPED: Result.step_capped,
}


class AbsorbingStateError(ValueError):
    pass


class RejectionCapError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# lcm


@dataclass(frozen=True)
class LcmTable:
    delta: int
    D: int


def _primes_upto(k: int) -> list[int]:
    if k < 2:
        return []
    sieve = bytearray([1]) * (k + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, int(k**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(range(p * p, k + 1, p)))
    return [p for p in range(k + 1) if sieve[p]]


def lcm_upto(delta: int) -> LcmTable:
    """D = lcm(1..delta) as the product of maximal prime powers <= delta."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    D = 1
    for p in _primes_upto(delta):
        t = p
        while t * p <= delta:
            t *= p
        D *= t
    return LcmTable(delta, D)


# ---------------------------------------------------------------------------
# pure Python active state


def _index(rng, k: int) -> int:
    i = int(rng.random() * k)
    return i if i < k else k - 1


@dataclass(eq=False)
class ActiveState:
    g: Graph
    r: float
    lcm: LcmTable
    n_mut: int = 0
    phi_scaled: int = 0
    mutant_index: set = field(default_factory=set)
    boundary_index: dict = field(default_factory=dict)
    boundary_array: list = field(default_factory=list)  # None or (v, d_bdry)
    free: list = field(default_factory=list)  # stack of unoccupied slots
    step_count: int = 0

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def occupied(self) -> int:
        return len(self.boundary_index)

    def d_bdry(self, v: int) -> int:
        i = self.boundary_index.get(v)
        return 0 if i is None else self.boundary_array[i][1]

    def mutants(self) -> frozenset[int]:
        return frozenset(self.mutant_index)

    def is_absorbed(self) -> bool:
        return self.n_mut == 0 or self.n_mut == self.g.n

    # slot array maintenance
    def _resize(self, size: int) -> None:
        kept = [e for e in self.boundary_array if e is not None]
        self.boundary_array = kept + [None] * (size - len(kept))
        for i, (v, _) in enumerate(kept):
            self.boundary_index[v] = i
        self.free = list(range(size - 1, len(kept) - 1, -1))

    def _set_bdry(self, v: int, d: int) -> None:
        i = self.boundary_index.get(v)
        if i is not None:
            if d > 0:
                self.boundary_array[i] = (v, d)
                return
            self.boundary_array[i] = None
            del self.boundary_index[v]
            self.free.append(i)
            if 3 * len(self.boundary_index) < len(self.boundary_array):
                self._resize(2 * len(self.boundary_index))
        elif d > 0:
            if not self.free:
                self._resize(2 * (len(self.boundary_index) + 1))
            i = self.free.pop()
            self.boundary_array[i] = (v, d)
            self.boundary_index[v] = i
            if 3 * len(self.boundary_index) > 2 * len(self.boundary_array):
                self._resize(2 * len(self.boundary_index))

    def apply_flip(self, w: int) -> None:
        deg = self.g.degree_list
        share = self.lcm.D // deg[w]
        if w in self.mutant_index:
            self.mutant_index.remove(w)
            self.n_mut -= 1
            self.phi_scaled -= share
            now_mut = False
        else:
            self.mutant_index.add(w)
            self.n_mut += 1
            self.phi_scaled += share
            now_mut = True
        self._set_bdry(w, deg[w] - self.d_bdry(w))
        for u in self.g.in_adjacency[w]:
            same = (u in self.mutant_index) == now_mut
            self._set_bdry(u, self.d_bdry(u) + (-1 if same else 1))

    def choose_transition(self, rng) -> tuple[int, int]:
        """Sample (spawner, target) of the next active step without applying it."""
        if self.is_absorbed():
            raise AbsorbingStateError("no active step from an absorbing state")
        deg = self.g.degree_list
        arr = self.boundary_array
        size = len(arr)
        r = self.r
        cap = REJECTION_CAP_FACTOR * self.g.max_degree
        for _ in range(cap):
            e = arr[_index(rng, size)]
            if e is None:
                continue
            v, d = e
            u = rng.random()
            if v in self.mutant_index:
                ok = u * deg[v] < d
            else:
                ok = u * r * deg[v] < d
            if ok:
                break
        else:
            raise RejectionCapError(f"rejection loop exceeded {cap} iterations")
        j = _index(rng, d)
        vm = v in self.mutant_index
        for w in self.g.adjacency[v]:
            if (w in self.mutant_index) != vm:
                if j == 0:
                    return v, w
                j -= 1
        raise AssertionError("boundary degree out of sync")

    def step(self, rng) -> tuple[int, int]:
        v, w = self.choose_transition(rng)
        self.apply_flip(w)
        self.step_count += 1
        return v, w


def _empty_state(g: Graph, lcm: LcmTable | None, r) -> ActiveState:
    if lcm is None:
        lcm = lcm_upto(max(1, g.max_degree))
    elif lcm.delta < g.max_degree:
        raise ValueError("lcm table does not cover the maximum degree")
    return ActiveState(g, float(r), lcm)


def init_active(g: Graph, v0: int, lcm: LcmTable | None = None, r=2) -> ActiveState:
    if not 1 <= v0 <= g.n:
        raise ValueError(f"start vertex {v0} outside 1..{g.n}")
    s = _empty_state(g, lcm, r)
    s.apply_flip(v0)
    return s


def init_active_set(g: Graph, S: Iterable[int], lcm: LcmTable | None = None, r=2) -> ActiveState:
    s = _empty_state(g, lcm, r)
    for v in sorted(set(S)):
        if not 1 <= v <= g.n:
            raise ValueError(f"vertex {v} outside 1..{g.n}")
        s.apply_flip(v)
    return s


def active_step(state: ActiveState, rng) -> tuple[int, int]:
    return state.step(rng)


def audit_invariants(g: Graph, state: ActiveState) -> list[str]:
    """Recompute everything from scratch; empty list iff I1-I5 and occupancy hold."""
    out = []
    M = state.mutant_index
    if any(not 1 <= v <= g.n for v in M):
        out.append("I3: mutant index holds an invalid vertex")
    if state.n_mut != len(M):
        out.append(f"I1: n_mut={state.n_mut}, |M|={len(M)}")
    deg = g.degree_list
    want_phi = sum(state.lcm.D // deg[v] for v in M)
    if state.phi_scaled != want_phi:
        out.append(f"I2: phi_scaled={state.phi_scaled}, expected {want_phi}")
    adj = g.adjacency
    for v in g.vertices():
        vm = v in M
        d = sum(1 for w in adj[v] if (w in M) != vm)
        has = v in state.boundary_index
        if has != (d > 0):
            out.append(f"I4: vertex {v} d_bdry={d} but indexed={has}")
        if has:
            i = state.boundary_index[v]
            if not 0 <= i < len(state.boundary_array) or state.boundary_array[i] != (v, d):
                out.append(f"I5: slot of {v} does not hold ({v}, {d})")
    held = [e for e in state.boundary_array if e is not None]
    if len(held) != len(state.boundary_index):
        out.append("I5: slot array holds entries missing from the index")
    size = len(state.boundary_array)
    if size and not (size <= 3 * len(held) <= 2 * size):
        out.append(f"occupancy: {len(held)}/{size} outside [1/3, 2/3]")
    if not held and size:
        out.append("occupancy: empty structure with non-empty array")
    return out


# ---------------------------------------------------------------------------
# pure Python naive state


class NaiveState:
    """Full-process state with O(1) uniform member draws (swap-ordered permutation)."""

    def __init__(self, g: Graph, r, S: Iterable[int], D: int = 0):
        self.g = g
        self.r = float(r)
        self.D = D
        n = g.n
        self.perm = list(range(n + 1))  # perm[1..k] are mutants
        self.pos = list(range(n + 1))
        self.k = 0
        self.phi_scaled = 0
        for v in sorted(set(S)):
            self.flip(v)

    def is_mut(self, v: int) -> bool:
        return self.pos[v] <= self.k

    def _swap(self, a: int, b: int) -> None:
        perm, pos = self.perm, self.pos
        va, vb = perm[a], perm[b]
        perm[a], perm[b] = vb, va
        pos[va], pos[vb] = b, a

    def flip(self, w: int) -> None:
        share = self.D // self.g.degree_list[w] if self.D else 0
        if self.is_mut(w):
            self._swap(self.pos[w], self.k)
            self.k -= 1
            self.phi_scaled -= share
        else:
            self.k += 1
            self._swap(self.pos[w], self.k)
            self.phi_scaled += share

    def choose(self, rng) -> tuple[int, int]:
        n, k, r = self.g.n, self.k, self.r
        W = n + (r - 1.0) * k
        if rng.random() * W < r * k:
            x = self.perm[1 + _index(rng, k)]
        else:
            x = self.perm[k + 1 + _index(rng, n - k)]
        nbrs = self.g.adjacency[x]
        return x, nbrs[_index(rng, len(nbrs))]

    def step(self, rng) -> tuple[int, int, bool]:
        x, y = self.choose(rng)
        changed = self.is_mut(x) != self.is_mut(y)
        if changed:
            self.flip(y)
        return x, y, changed


def naive_step(g: Graph, r, M: Iterable[int], rng) -> frozenset[int]:
    """One full step (possibly idle) from M."""
    M = frozenset(M)
    if not M or len(M) == g.n:
        raise AbsorbingStateError("no step from an absorbing state")
    st = NaiveState(g, r, M)
    st.step(rng)
    return frozenset(st.perm[1 : st.k + 1])


# ---------------------------------------------------------------------------
# numba kernels (mirror the Python classes above)

# Helpers never allocate, so they are compiled without the reference-counting
# runtime; with it, every call that passes arrays paid ~90 ns of refcount work.
_helper = njit(cache=True, _nrt=False)



@_helper
def _draw(u, pp):
    p = pp[0]
    if p >= u.shape[0]:
        return -1.0
    pp[0] = p + 1
    return u[p]


@_helper
def _idx(x, k):
    i = int(x * k)
    return i if i < k else k - 1


@_helper
def _k_resize(newsize, slots, where, free, sc):
    j = 0
    for i in range(sc[0]):
        v = slots[i]
        if v != 0:
            slots[j] = v
            where[v] = j
            j += 1
    for i in range(j, max(newsize, sc[0])):
        slots[i] = 0
    nf = 0
    for i in range(newsize - 1, j - 1, -1):
        free[nf] = i
        nf += 1
    sc[0] = newsize
    sc[2] = nf


@_helper
def _k_set_bd(v, d, bd, where, slots, free, sc):
    # sc: size, count, nfree
    old = bd[v]
    bd[v] = d
    if old > 0:
        if d == 0:
            i = where[v]
            slots[i] = 0
            where[v] = -1
            free[sc[2]] = i
            sc[2] += 1
            sc[1] -= 1
            if 3 * sc[1] < sc[0]:
                _k_resize(2 * sc[1], slots, where, free, sc)
    elif d > 0:
        if sc[2] == 0:
            _k_resize(2 * (sc[1] + 1), slots, where, free, sc)
        sc[2] -= 1
        i = free[sc[2]]
        slots[i] = v
        where[v] = i
        sc[1] += 1
        if 3 * sc[1] > 2 * sc[0]:
            _k_resize(2 * sc[1], slots, where, free, sc)


@_helper
def _k_flip(w, indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st):
    # st: n_mut, phi
    if is_mut[w]:
        is_mut[w] = 0
        st[0] -= 1
        st[1] -= D // deg[w]
        now = 0
    else:
        is_mut[w] = 1
        st[0] += 1
        st[1] += D // deg[w]
        now = 1
    _k_set_bd(w, deg[w] - bd[w], bd, where, slots, free, sc)
    for t in range(inptr[w], inptr[w + 1]):
        u = inidx[t]
        if is_mut[u] == now:
            _k_set_bd(u, bd[u] - 1, bd, where, slots, free, sc)
        else:
            _k_set_bd(u, bd[u] + 1, bd, where, slots, free, sc)


@_helper
def _k_choose(indptr, indices, deg, r, cap, is_mut, bd, slots, sc, u, pp, out):
    """Writes (spawner, target) to out; returns a status code."""
    size = sc[0]
    v = 0
    for _ in range(cap):
        x = _draw(u, pp)
        if x < 0:
            return EXHAUSTED
        v = slots[_idx(x, size)]
        if v == 0:
            continue
        y = _draw(u, pp)
        if y < 0:
            return EXHAUSTED
        d = bd[v]
        if is_mut[v]:
            if y * deg[v] < d:
                break
        elif y * r * deg[v] < d:
            break
    else:
        return REJECTION_CAP
    z = _draw(u, pp)
    if z < 0:
        return EXHAUSTED
    j = _idx(z, bd[v])
    vm = is_mut[v]
    for t in range(indptr[v], indptr[v + 1]):
        w = indices[t]
        if is_mut[w] != vm:
            if j == 0:
                out[0] = v
                out[1] = w
                return OK
            j -= 1
    return REJECTION_CAP  # unreachable when invariants hold


@_helper
def _k_reset(n, is_mut, bd, where, sc, st):
    for v in range(n + 1):
        is_mut[v] = 0
        bd[v] = 0
        where[v] = -1
    sc[0] = 0
    sc[1] = 0
    sc[2] = 0
    st[0] = 0
    st[1] = 0


@_helper
def _active_runs(indptr, indices, inptr, inidx, deg, n, r, D, cap, j0, starts, start_set,
                 thr, max_steps, budget, u, res, steps, phis, ws):
    """Run replicas j0.. back to back on one uniform buffer.

    starts[j]: vertex id, 0 for a uniform vertex, -1 for start_set.
    thr < 0 disables the threshold; max_steps < 0 disables the per-run cap;
    budget < 0 disables the block budget.

    Returns (status, steps of completed replicas, failing replica, its buffer
    offset); the last two let the caller extend the buffer and resume.
    """
    is_mut, bd, where, slots, free, sc, st, out, pp = ws
    pp[0] = 0
    total = 0
    for j in range(j0, starts.shape[0]):
        p0 = pp[0]
        _k_reset(n, is_mut, bd, where, sc, st)
        s0 = starts[j]
        if s0 == 0:
            x = _draw(u, pp)
            if x < 0:
                return EXHAUSTED, total, j, p0
            _k_flip(1 + _idx(x, n), indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st)
        elif s0 > 0:
            _k_flip(s0, indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st)
        else:
            for v in start_set:
                _k_flip(v, indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st)
        k = 0
        for _ in range(FOREVER):
            if st[0] == 0:
                res[j] = RES_EXTINCTION
                break
            if st[0] == n:
                res[j] = RES_FIXATION
                break
            if thr >= 0 and st[1] >= thr:
                res[j] = RES_THRESHOLD
                break
            if max_steps >= 0 and k >= max_steps:
                res[j] = RES_CAPPED
                break
            if budget >= 0 and total + k >= budget:
                return OVER_BUDGET, total + k, j, p0
            status = _k_choose(indptr, indices, deg, r, cap, is_mut, bd, slots, sc, u, pp, out)
            if status != OK:
                return status, total, j, p0
            _k_flip(out[1], indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st)
            k += 1
        steps[j] = k
        phis[j] = st[1]
        total += k
    return OK, total, starts.shape[0], pp[0]


@_helper
def _active_samples(indptr, indices, inptr, inidx, deg, n, r, D, cap, start_set, j0, count, u, sp, tg, ws):
    """Independent (spawner, target) draws j0..count-1 from one fixed state."""
    is_mut, bd, where, slots, free, sc, st, out, pp = ws
    _k_reset(n, is_mut, bd, where, sc, st)
    for v in start_set:
        _k_flip(v, indptr, inptr, inidx, deg, D, is_mut, bd, where, slots, free, sc, st)
    pp[0] = 0
    for j in range(j0, count):
        p0 = pp[0]
        status = _k_choose(indptr, indices, deg, r, cap, is_mut, bd, slots, sc, u, pp, out)
        if status != OK:
            return status, j, p0
        sp[j] = out[0]
        tg[j] = out[1]
    return OK, count, pp[0]


@_helper
def _n_flip(w, perm, pos, kk, deg, D, st):
    # kk[0] = number of mutants; mutants are perm[1..k]
    k = kk[0]
    if pos[w] <= k:
        a = pos[w]
        vb = perm[k]
        perm[a] = vb
        perm[k] = w
        pos[vb] = a
        pos[w] = k
        kk[0] = k - 1
        st[0] -= D // deg[w]
    else:
        k += 1
        a = pos[w]
        vb = perm[k]
        perm[a] = vb
        perm[k] = w
        pos[vb] = a
        pos[w] = k
        kk[0] = k
        st[0] += D // deg[w]


@_helper
def _n_choose(n, r, indptr, indices, deg, perm, k, u, pp, out):
    x = _draw(u, pp)
    y = _draw(u, pp)
    z = _draw(u, pp)
    if z < 0:
        return EXHAUSTED
    W = n + (r - 1.0) * k
    if x * W < r * k:
        v = perm[1 + _idx(y, k)]
    else:
        v = perm[k + 1 + _idx(y, n - k)]
    out[0] = v
    out[1] = indices[indptr[v] + _idx(z, deg[v])]
    return OK


@_helper
def _naive_runs(indptr, indices, deg, n, r, D, j0, starts, start_set, max_steps, u, res, asteps, nsteps, phis, ws):
    """Naive counterpart of _active_runs; same return convention."""
    perm, pos, kk, st, out, pp = ws
    pp[0] = 0
    total = 0
    for j in range(j0, starts.shape[0]):
        p0 = pp[0]
        for v in range(n + 1):
            perm[v] = v
            pos[v] = v
        kk[0] = 0
        st[0] = 0
        s0 = starts[j]
        if s0 == 0:
            x = _draw(u, pp)
            if x < 0:
                return EXHAUSTED, total, j, p0
            _n_flip(1 + _idx(x, n), perm, pos, kk, deg, D, st)
        elif s0 > 0:
            _n_flip(s0, perm, pos, kk, deg, D, st)
        else:
            for v in start_set:
                _n_flip(v, perm, pos, kk, deg, D, st)
        a = 0
        t = 0
        for _ in range(FOREVER):
            if kk[0] == 0:
                res[j] = RES_EXTINCTION
                break
            if kk[0] == n:
                res[j] = RES_FIXATION
                break
            if max_steps >= 0 and t >= max_steps:
                res[j] = RES_CAPPED
                break
            if _n_choose(n, r, indptr, indices, deg, perm, kk[0], u, pp, out) != OK:
                return EXHAUSTED, total, j, p0
            t += 1
            x, y = out[0], out[1]
            if (pos[x] <= kk[0]) != (pos[y] <= kk[0]):
                _n_flip(y, perm, pos, kk, deg, D, st)
                a += 1
        asteps[j] = a
        nsteps[j] = t
        phis[j] = st[0]
        total += a
    return OK, total, starts.shape[0], pp[0]


@_helper
def _naive_samples(indptr, indices, deg, n, r, start_set, count, u, sp, tg, ws):
    perm, pos, kk, st, out, pp = ws
    for v in range(n + 1):
        perm[v] = v
        pos[v] = v
    kk[0] = 0
    pp[0] = 0
    for v in start_set:
        _n_flip(v, perm, pos, kk, deg, 0, st)
    for j in range(count):
        if _n_choose(n, r, indptr, indices, deg, perm, kk[0], u, pp, out) != OK:
            return EXHAUSTED
        sp[j] = out[0]
        tg[j] = out[1]
    return OK


# ---------------------------------------------------------------------------
# kernel plumbing


def _active_ws(n: int):
    return (np.zeros(n + 1, np.int8), np.zeros(n + 1, np.int64), np.full(n + 1, -1, np.int64),
            np.zeros(2 * n + 4, np.int64), np.zeros(2 * n + 4, np.int64), np.zeros(3, np.int64),
            np.zeros(2, np.int64), np.zeros(2, np.int64), np.zeros(1, np.int64))


def _naive_ws(n: int):
    return (np.zeros(n + 1, np.int64), np.zeros(n + 1, np.int64), np.zeros(1, np.int64),
            np.zeros(1, np.int64), np.zeros(2, np.int64), np.zeros(1, np.int64))


@dataclass(frozen=True, eq=False)
class KernelGraph:
    """Graph arrays in kernel layout plus the lcm for exact phi."""

    g: Graph
    lcm: LcmTable
    indptr: np.ndarray
    indices: np.ndarray
    inptr: np.ndarray
    inidx: np.ndarray
    deg: np.ndarray

    @property
    def D(self) -> int:
        return self.lcm.D

    @property
    def fits(self) -> bool:
        """Whether phi_scaled can live in int64 for every state."""
        return self.g.n * self.lcm.D < INT64_SAFE


def kernel_graph(g: Graph, lcm: LcmTable | None = None) -> KernelGraph:
    lcm = lcm or lcm_upto(max(1, g.max_degree))
    indptr = g.indptr.astype(np.int64)
    indices = g.indices.astype(np.int64)
    if g.directed:
        inn = g.in_adjacency
        lens = np.fromiter((len(a) for a in inn), dtype=np.int64, count=g.n + 1)
        inptr = np.zeros(g.n + 2, dtype=np.int64)
        np.cumsum(lens, out=inptr[1:])
        inidx = np.fromiter((w for a in inn for w in a), dtype=np.int64, count=int(inptr[-1]))
    else:
        inptr, inidx = indptr, indices
    return KernelGraph(g, lcm, indptr, indices, inptr, inidx, g.degree.astype(np.int64))


def _start_code(g: Graph, start) -> tuple[int, np.ndarray]:
    if start is None or start == "uniform":
        return 0, np.zeros(0, np.int64)
    if isinstance(start, (int, np.integer)):
        if not 1 <= start <= g.n:
            raise ValueError(f"start vertex {start} outside 1..{g.n}")
        return int(start), np.zeros(0, np.int64)
    S = sorted(set(int(v) for v in start))
    if not S or any(not 1 <= v <= g.n for v in S):
        raise ValueError("start set must be a non-empty set of valid vertices")
    return -1, np.array(S, dtype=np.int64)


@dataclass
class BatchResult:
    results: np.ndarray  # result codes
    active_steps: np.ndarray
    naive_steps: np.ndarray | None
    phi_scaled: np.ndarray
    status: int
    total_steps: int
    uniforms: int  # draws consumed from the block stream


class _Feed:
    """Sequential uniform buffer over one block stream, extendable from an offset."""

    def __init__(self, seed: int, stream: int, block: int, size: int):
        self.gen = block_generator(seed, stream, block)
        self.base = 0  # stream position of buf[0]
        self.buf = self.gen.random(size)

    def resume_from(self, offset: int) -> None:
        keep = self.buf[offset:]
        extra = self.gen.random(max(len(self.buf), 4096))
        self.base += offset
        self.buf = np.concatenate([keep, extra])


def run_block(kg: KernelGraph, r: float, count: int, *, start="uniform", naive: bool = False,
              threshold_scaled: int = -1, max_steps: int = -1, budget: int = -1,
              seed: int = 0, stream: int = 0, block: int = 0, hint: int = 0) -> BatchResult:
    """``count`` replicas on the stream ``(seed, stream, block)`` via the kernels.

    When the buffer runs dry the failing replica is rerun on an extended
    buffer, so the outcome never depends on ``hint`` (the initial buffer size).
    """
    if not kg.fits:
        raise OverflowError("phi_scaled does not fit in int64; use the Python backend")
    g = kg.g
    code, sset = _start_code(g, start)
    starts = np.full(count, code, dtype=np.int64)
    res = np.zeros(count, np.int64)
    steps = np.zeros(count, np.int64)
    nsteps = np.zeros(count, np.int64)
    phis = np.zeros(count, np.int64)
    feed = _Feed(seed, stream, block, max(hint, 16 * count, 1024))
    cap = REJECTION_CAP_FACTOR * max(1, g.max_degree)
    ws = _naive_ws(g.n) if naive else _active_ws(g.n)
    j0 = 0
    total = 0
    while True:
        if naive:
            status, done, j, off = _naive_runs(kg.indptr, kg.indices, kg.deg, g.n, float(r), kg.D, j0, starts,
                                               sset, max_steps, feed.buf, res, steps, nsteps, phis, ws)
        else:
            left = -1 if budget < 0 else budget - total
            status, done, j, off = _active_runs(kg.indptr, kg.indices, kg.inptr, kg.inidx, kg.deg, g.n, float(r),
                                                kg.D, cap, j0, starts, sset, threshold_scaled, max_steps, left,
                                                feed.buf, res, steps, phis, ws)
        total += done
        if status != EXHAUSTED:
            break
        feed.resume_from(off)
        j0 = j
    if status == REJECTION_CAP:
        raise RejectionCapError("rejection loop exceeded its safety cap")
    return BatchResult(res, steps, nsteps if naive else None, phis, int(status), int(total), int(feed.base + off))


def sample_active_transitions(g: Graph, r, S: Iterable[int], count: int, seed: int = 0):
    """``count`` (spawner, target) pairs of the active chain from the fixed state S."""
    kg = kernel_graph(g)
    S = sorted(set(S))
    if not S or len(S) == g.n:
        raise AbsorbingStateError("no active step from an absorbing state")
    sp = np.zeros(count, np.int64)
    tg = np.zeros(count, np.int64)
    feed = _Feed(seed, 0, 0, 16 * count + 1024)
    ws = _active_ws(g.n)
    j0 = 0
    while True:
        status, j, off = _active_samples(kg.indptr, kg.indices, kg.inptr, kg.inidx, kg.deg, g.n, float(r), 0,
                                         REJECTION_CAP_FACTOR * g.max_degree, np.array(S, np.int64), j0, count,
                                         feed.buf, sp, tg, ws)
        if status != EXHAUSTED:
            break
        feed.resume_from(off)
        j0 = j
    if status != OK:
        raise RejectionCapError("rejection loop exceeded its safety cap")
    return sp, tg


def sample_naive_transitions(g: Graph, r, S: Iterable[int], count: int, seed: int = 0):
    """``count`` (spawner, target) pairs of the full chain from S; idle when types agree."""
    kg = kernel_graph(g)
    S = sorted(set(S))
    if not S or len(S) == g.n:
        raise AbsorbingStateError("no step from an absorbing state")
    sp = np.zeros(count, np.int64)
    tg = np.zeros(count, np.int64)
    u = block_uniforms(seed, 0, 0, 3 * count)
    _naive_samples(kg.indptr, kg.indices, kg.deg, g.n, float(r), np.array(S, np.int64), count, u, sp, tg, _naive_ws(g.n))
    return sp, tg


# ---------------------------------------------------------------------------
# run controller


@dataclass
class RunOutcome:
    result: Result
    active_steps: int
    naive_steps: int | None
    final_phi_scaled: int
    seed: int


MODES = ("naive", "active", "threshold", "capped")


def _check_mode(g: Graph, mode: str, threshold, max_steps) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "threshold":
        if threshold is None:
            raise ValueError("threshold mode needs a threshold P")
        if g.directed:
            raise ValueError("threshold mode is defined for undirected graphs only")
    if mode == "capped" and (max_steps is None or max_steps < 0):
        raise ValueError("capped mode needs max_steps >= 0")


def threshold_scaled(P, D: int) -> int:
    """ceil(P * D) in exact arithmetic."""
    return ceil(Fraction(P) * D)


def run(g: Graph, r, start="uniform", mode: str = "active", *, threshold=None, max_steps: int | None = None,
        seed: int = 0, trace: Callable[[str], None] | None = None, backend: str = "auto",
        lcm: LcmTable | None = None) -> RunOutcome:
    """One seeded run. ``mode``: naive | active | threshold | capped.

    ``max_steps`` caps active steps (naive steps in naive mode) in any mode.
    Both backends consume the same stream, so the outcome is backend-independent.
    """
    require_process_graph(g)
    _check_mode(g, mode, threshold, max_steps)
    lcm = lcm or lcm_upto(max(1, g.max_degree))
    thr = threshold_scaled(threshold, lcm.D) if mode == "threshold" else -1
    cap = -1 if max_steps is None else int(max_steps)
    if trace is not None and backend == "kernel":
        raise ValueError("tracing needs the Python backend")
    b = run_replicas(g, r, 1, start=start, naive=mode == "naive", threshold_scaled=thr, max_steps=cap,
                     seed=seed, lcm=lcm, backend="python" if trace is not None else backend, trace=trace)
    return RunOutcome(
        _RESULT_OF_CODE[int(b.results[0])],
        int(b.active_steps[0]),
        int(b.naive_steps[0]) if b.naive_steps is not None else None,
        int(b.phi_scaled[0]),
        seed,
    )


def run_replicas(g: Graph, r, count: int, *, start="uniform", naive: bool = False, threshold_scaled: int = -1,
                 max_steps: int = -1, budget: int = -1, seed: int = 0, stream: int = 0, block: int = 0,
                 lcm: LcmTable | None = None, backend: str = "auto", hint: int = 0,
                 trace: Callable[[str], None] | None = None, kg: KernelGraph | None = None) -> BatchResult:
    """``count`` replicas on one block stream, on whichever backend fits."""
    if backend not in ("auto", "kernel", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend != "python":
        kg = kg or kernel_graph(g, lcm)
        if kg.fits:
            return run_block(kg, float(r), count, start=start, naive=naive, threshold_scaled=threshold_scaled,
                             max_steps=max_steps, budget=budget, seed=seed, stream=stream, block=block, hint=hint)
        if backend == "kernel":
            raise OverflowError("phi_scaled does not fit in int64 for this graph")
        lcm = kg.lcm
    lcm = lcm or lcm_upto(max(1, g.max_degree))
    return run_block_python(g, r, count, start=start, naive=naive, threshold_scaled=threshold_scaled,
                            max_steps=max_steps, budget=budget, seed=seed, stream=stream, block=block,
                            lcm=lcm, trace=trace)


def _python_start(g: Graph, code: int, sset: np.ndarray, rng) -> list[int]:
    if code == 0:
        return [1 + _index(rng, g.n)]
    if code > 0:
        return [code]
    return sset.tolist()


def run_block_python(g: Graph, r, count: int, *, start="uniform", naive: bool = False, threshold_scaled: int = -1,
                     max_steps: int = -1, budget: int = -1, seed: int = 0, stream: int = 0, block: int = 0,
                     lcm: LcmTable, trace: Callable[[str], None] | None = None) -> BatchResult:
    """Pure Python twin of ``run_block``; exact big-integer phi, optional trace."""
    rng = UniformStream(seed, stream, block)
    code, sset = _start_code(g, start)
    n = g.n
    res = np.zeros(count, np.int64)
    steps = np.zeros(count, np.int64)
    nsteps = np.zeros(count, np.int64)
    phis = np.zeros(count, dtype=object)
    total = 0
    status = OK
    for j in range(count):
        S = _python_start(g, code, sset, rng)
        if naive:
            st = NaiveState(g, r, S, lcm.D)
            a = t = 0
            while 0 < st.k < n and (max_steps < 0 or t < max_steps):
                x, y, changed = st.step(rng)
                t += 1
                if changed:
                    a += 1
                    if trace:
                        trace(f"{a},{x},{y},{st.k},{st.phi_scaled}")
            res[j] = RES_EXTINCTION if st.k == 0 else RES_FIXATION if st.k == n else RES_CAPPED
            steps[j], nsteps[j], phis[j] = a, t, st.phi_scaled
            total += a
            continue
        s = init_active_set(g, S, lcm, r)
        while True:
            if s.n_mut == 0:
                res[j] = RES_EXTINCTION
            elif s.n_mut == n:
                res[j] = RES_FIXATION
            elif threshold_scaled >= 0 and s.phi_scaled >= threshold_scaled:
                res[j] = RES_THRESHOLD
            elif max_steps >= 0 and s.step_count >= max_steps:
                res[j] = RES_CAPPED
            elif budget >= 0 and total + s.step_count >= budget:
                status = OVER_BUDGET
            else:
                v, w = s.step(rng)
                if trace:
                    trace(f"{s.step_count},{v},{w},{s.n_mut},{s.phi_scaled}")
                continue
            break
        total += s.step_count
        if status != OK:
            break
        steps[j], phis[j] = s.step_count, s.phi_scaled
    return BatchResult(res, steps, nsteps if naive else None, phis, status, total, rng.consumed)
