"""Suppressor audits: the sigma supermartingale check on H_{a,k} and the
directed fixation bound on G_{k,a}."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .estimator import monte_carlo_fixation
from .exact import one_step_expected_change
from .families import LabeledGraph, dir_suppressor, sigma_potential
from .rng import block_generator


def sample_sigma_states(h: LabeledGraph, count: int, seed: int = 0, max_size: int = 40,
                        max_tries: int = 100_000) -> list[frozenset[int]]:
    """Random mutant sets S with |S| <= max_size and 0 < sigma(S) < k.

    States mix star-local clusters (a V2 centre with some of its own leaves)
    with scattered V0/V1 vertices, so both the V1<->V2 and V0<->V1 boundary
    terms are exercised.
    """
    if h.sigma is None:
        raise ValueError("graph carries no sigma weights")
    k = h.sigma.k
    V0, V1, V2 = (np.asarray(h.groups[f"V{i}"]) for i in range(3))
    rng = block_generator(seed, 0, 0)
    out: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()
    for _ in range(max_tries):
        if len(out) == count:
            break
        S: set[int] = set()
        centres = rng.choice(V2, size=int(rng.integers(0, 3)), replace=False)
        for c in centres.tolist():
            S.add(c)
            j = c - int(V2[0])
            leaves = V1[j * k:(j + 1) * k]
            take = int(rng.integers(0, min(len(leaves), max_size // 2) + 1))
            S.update(rng.choice(leaves, size=take, replace=False).tolist())
        room = max_size - len(S)
        if room > 0:
            S.update(rng.choice(V1, size=int(rng.integers(0, min(room, k) + 1)), replace=False).tolist())
        room = max_size - len(S)
        if room > 0:
            S.update(rng.choice(V0, size=int(rng.integers(0, min(room, len(V0)) + 1)), replace=False).tolist())
        fs = frozenset(S)
        if not fs or len(fs) > max_size or fs in seen:
            continue
        sig = sigma_potential(h, fs)
        if 0 < sig < k:
            seen.add(fs)
            out.append(fs)
    if len(out) < count:
        raise RuntimeError(f"only found {len(out)} admissible states")
    return out


@dataclass
class SigmaCheck:
    state_size: int
    sigma: Fraction
    expected_change: Fraction

    @property
    def ok(self) -> bool:
        return self.expected_change <= 0


def sigma_audit(h: LabeledGraph, r, samples: int = 100, seed: int = 0, max_size: int = 40) -> list[SigmaCheck]:
    """Exact one-step expected sigma change on sampled states."""
    out = []
    for S in sample_sigma_states(h, samples, seed, max_size):
        e = one_step_expected_change(h.graph, r, S, kind="sigma", context=h.sigma)
        out.append(SigmaCheck(len(S), sigma_potential(h, S), e.value))
    return out


@dataclass
class DirectedCheck:
    k: int
    a: int
    level: int
    runs: int
    fixated: int
    frequency: float
    bound: float
    stderr: float

    @property
    def ok(self) -> bool:
        return self.frequency <= self.bound + 3 * self.stderr


def directed_bound(level: int, a: int, r) -> float:
    """Fixation bound from start group X_level: 2^(5 - level) * a * r."""
    return math.ldexp(a * float(r), 5 - level)


def directed_audit(k: int, a: int, r, level: int | None = None, runs: int = 10_000, seed: int = 0,
                   jobs: int = 1) -> DirectedCheck:
    level = k if level is None else level
    G = dir_suppressor(k, a)
    start = G.groups[f"X{level}"]
    mc = monte_carlo_fixation(G.graph, r, runs, seed=seed, start=start, jobs=jobs)
    bound = directed_bound(level, a, r)
    # binomial sd under the bound (or the observed rate, whichever is larger)
    p = min(1.0, max(bound, mc.value))
    se = math.sqrt(p * (1 - p) / runs)
    return DirectedCheck(k, a, level, runs, mc.fixated, mc.value, bound, se)
