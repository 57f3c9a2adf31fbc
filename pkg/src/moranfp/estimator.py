"""Fixation-probability estimators and absorption-time measurement.

``estimate_fixation`` is the early-terminating scheme: N active runs, each
stopped at extinction or once the potential reaches P, averaged; wrapped in a
step cap of 27T per attempt and a median of three attempts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import median

import numpy as np
from scipy.stats import binomtest

from .engine import (
    OVER_BUDGET,
    RES_EXTINCTION,
    RES_FIXATION,
    RES_THRESHOLD,
    ActiveState,
    BatchResult,
    init_active_set,
    kernel_graph,
    lcm_upto,
    run_replicas,
    threshold_scaled,
)
from .graph import Graph, average_degree, is_connected, require_process_graph
from .potential import phi
from .rng import BLOCK_SIZE, UniformStream

FAILURE = -1.0  # sentinel value of an overrun attempt / failed estimate
ATTEMPTS = 3
CAP_FACTOR = 27


@dataclass(frozen=True)
class FprasParams:
    r: Fraction | float
    eps: Fraction
    N: int
    P: Fraction
    P_prime: int
    T: Fraction | float  # expected-step budget over all N runs
    T_cap: int  # an attempt overruns when its steps exceed this (= floor(27 T))
    delta: int
    avg_degree: Fraction


@dataclass
class Attempt:
    value: float
    runs_fixated: int
    active_steps: int
    overrun: bool


@dataclass
class Estimate:
    value: float
    runs_fixated: int
    total_active_steps: int
    params: FprasParams | None
    seed: int
    capped: bool
    attempts: list[Attempt] = field(default_factory=list)
    shortcut: str | None = None  # "disconnected" or "single_vertex" when no runs were needed


def _as_r(r) -> Fraction | float:
    if isinstance(r, float):
        return r
    return Fraction(r)


def least_power_at_least(r, bound: int) -> int:
    """Least integer k >= 0 with r^k >= bound; exact for rational r."""
    if isinstance(r, float):
        # float r: log with a +1 safety margin (a larger P only tightens correctness)
        return max(0, math.ceil(math.log(bound) / math.log(r)) + 1)
    k = 0
    power = Fraction(1)
    while power < bound:
        power *= r
        k += 1
    return k


def fpras_params(g: Graph, r, eps) -> FprasParams:
    r = _as_r(r)
    eps = Fraction(eps)
    if not r > 1:
        raise ValueError("the scheme needs r > 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if g.directed:
        raise ValueError("the scheme is defined for undirected graphs")
    require_process_graph(g)
    dbar = average_degree(g)
    if isinstance(r, float):
        N = 18 * math.ceil(r * float(dbar) / (float(eps) ** 2 * (r - 1)))
    else:
        N = 18 * math.ceil(r * dbar / (eps**2 * (r - 1)))
    P_prime = least_power_at_least(r, 6 * N)
    P = min(Fraction(P_prime), phi(g, g.vertices()))
    delta = g.max_degree
    if isinstance(r, float):
        T = N * 2 * r * (float(P) + 1) * delta / (r - 1)
        T_cap = math.floor(CAP_FACTOR * T)
    else:
        T = N * 2 * r * (P + 1) * delta / (r - 1)
        T_cap = math.floor(CAP_FACTOR * T)
    return FprasParams(r, eps, N, P, P_prime, T, T_cap, delta, dbar)


# ---------------------------------------------------------------------------
# replica fan-out


def _blocks(count: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK_SIZE, count - b * BLOCK_SIZE)) for b in range(-(-count // BLOCK_SIZE))]


def _block_job(args) -> BatchResult:
    g, r, size, kw = args
    return run_replicas(g, r, size, **kw)


def replicate(g: Graph, r, count: int, *, seed: int, stream: int = 0, jobs: int = 1,
              stop_after: int | None = None, **kw) -> list[BatchResult]:
    """Run ``count`` replicas split into fixed blocks; results in block order.

    Replica i always lives in block i // BLOCK_SIZE of stream ``(seed, stream)``,
    so the outcome does not depend on ``jobs``. With ``stop_after`` set, the
    serial path stops once the summed active steps exceed it (the caller only
    needs to know that the budget was overrun).
    """
    kg = kernel_graph(g)
    kw = dict(kw, kg=kg if kg.fits else None, lcm=kg.lcm)
    tasks = [(g, r, size, dict(kw, seed=seed, stream=stream, block=b)) for b, size in _blocks(count)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_block_job, tasks))
    out = []
    total = 0
    hint = 0
    for t in tasks:
        t[3]["hint"] = hint
        b = _block_job(t)
        out.append(b)
        hint = int(b.uniforms * 1.25)
        total += b.total_steps
        if stop_after is not None and (total > stop_after or b.status == OVER_BUDGET):
            break
    return out


def _attempt(g: Graph, params: FprasParams, seed: int, attempt: int, jobs: int) -> Attempt:
    lcm = lcm_upto(max(1, g.max_degree))
    thr = threshold_scaled(params.P, lcm.D)
    budget = params.T_cap + 1  # per block; overrun is judged on the sum
    blocks = replicate(g, params.r, params.N, seed=seed, stream=attempt, jobs=jobs, stop_after=params.T_cap,
                       threshold_scaled=thr, budget=budget)
    steps = sum(b.total_steps for b in blocks)
    if steps > params.T_cap or any(b.status == OVER_BUDGET for b in blocks):
        # how far past the cap we got depends on scheduling; report the cap
        return Attempt(FAILURE, 0, params.T_cap + 1, True)
    res = np.concatenate([b.results for b in blocks])
    hits = int(np.count_nonzero((res == RES_THRESHOLD) | (res == RES_FIXATION)))
    return Attempt(hits / params.N, hits, steps, False)


def estimate_fixation(g: Graph, r, eps, seed: int = 0, jobs: int = 1) -> Estimate:
    """Median of three capped attempts; FAILURE when the median attempt overran."""
    if g.n == 1:
        return Estimate(1.0, 0, 0, None, seed, False, shortcut="single_vertex")
    r_ = _as_r(r)
    if not r_ > 1:
        raise ValueError("the scheme needs r > 1")
    if not 0 < Fraction(eps) < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not is_connected(g):
        return Estimate(0.0, 0, 0, None, seed, False, shortcut="disconnected")
    params = fpras_params(g, r_, eps)
    attempts = [_attempt(g, params, seed, a, jobs) for a in range(ATTEMPTS)]
    value = median(a.value for a in attempts)
    total = sum(a.active_steps for a in attempts)
    if value == FAILURE:
        return Estimate(FAILURE, 0, total, params, seed, True, attempts)
    chosen = next(a for a in attempts if a.value == value)
    return Estimate(value, chosen.runs_fixated, total, params, seed, False, attempts)


def threshold_runs(g: Graph, r, P, runs: int, seed: int = 0, stream: int = 0, jobs: int = 1):
    """Per-run (result codes, active steps, final phi_scaled) of runs stopped at phi >= P."""
    lcm = lcm_upto(max(1, g.max_degree))
    blocks = replicate(g, r, runs, seed=seed, stream=stream, jobs=jobs,
                       threshold_scaled=threshold_scaled(P, lcm.D))
    return (np.concatenate([b.results for b in blocks]), np.concatenate([b.active_steps for b in blocks]),
            np.concatenate([b.phi_scaled for b in blocks]), lcm)


# ---------------------------------------------------------------------------
# plain Monte Carlo


@dataclass
class MonteCarloEstimate:
    value: float
    fixated: int
    runs: int
    ci_low: float
    ci_high: float
    total_active_steps: int

    @property
    def stderr(self) -> float:
        return math.sqrt(max(self.value * (1 - self.value), 0.0) / self.runs)


def monte_carlo_fixation(g: Graph, r, runs: int, seed: int = 0, start="uniform", jobs: int = 1,
                         max_steps: int = -1) -> MonteCarloEstimate:
    """Fraction of active runs to absorption that fixate, with a Wilson 95% interval."""
    require_process_graph(g)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    blocks = replicate(g, r, runs, seed=seed, jobs=jobs, start=start, max_steps=max_steps)
    res = np.concatenate([b.results for b in blocks])
    k = int(np.count_nonzero(res == RES_FIXATION))
    ci = binomtest(k, runs).proportion_ci(0.95, method="wilson")
    return MonteCarloEstimate(k / runs, k, runs, float(ci.low), float(ci.high), sum(b.total_steps for b in blocks))


@dataclass
class AbsorptionTime:
    mean: float
    stderr: float
    runs: int


def absorption_times(g: Graph, r, runs: int, seed: int = 0, start="uniform", jobs: int = 1) -> np.ndarray:
    require_process_graph(g)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    blocks = replicate(g, r, runs, seed=seed, jobs=jobs, start=start, naive=True)
    return np.concatenate([b.naive_steps for b in blocks]).astype(np.int64)


def mean_absorption_time(g: Graph, r, runs: int, seed: int = 0, start="uniform", jobs: int = 1) -> AbsorptionTime:
    """Sample mean (and standard error) of full-process steps to absorption."""
    t = absorption_times(g, r, runs, seed, start, jobs).astype(float)
    se = float(t.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return AbsorptionTime(float(t.mean()), se, runs)


# ---------------------------------------------------------------------------
# early-termination witness


@dataclass
class TerminationWitness:
    reached: int  # runs that hit phi >= P before absorbing
    extinct_after: int  # of those, runs that went extinct when continued
    runs: int

    @property
    def fraction(self) -> float:
        return self.extinct_after / self.reached if self.reached else 0.0


def early_termination_witness(g: Graph, r, P, runs: int, seed: int = 0) -> TerminationWitness:
    """Run to phi >= P, then keep going to absorption; count late extinctions."""
    require_process_graph(g)
    lcm = lcm_upto(max(1, g.max_degree))
    thr = threshold_scaled(P, lcm.D)
    rng = UniformStream(seed, 0, 0)
    reached = extinct = 0
    n = g.n
    for _ in range(runs):
        s: ActiveState = init_active_set(g, [1 + rng.index(n)], lcm, r)
        hit = False
        while 0 < s.n_mut < n:
            if not hit and s.phi_scaled >= thr:
                hit = True
            s.step(rng)
        if hit:
            reached += 1
            extinct += s.n_mut == 0
    return TerminationWitness(reached, extinct, runs)


__all__ = [
    "FAILURE",
    "FprasParams",
    "Estimate",
    "Attempt",
    "fpras_params",
    "estimate_fixation",
    "threshold_runs",
    "replicate",
    "monte_carlo_fixation",
    "MonteCarloEstimate",
    "mean_absorption_time",
    "absorption_times",
    "AbsorptionTime",
    "early_termination_witness",
    "TerminationWitness",
    "RES_EXTINCTION",
]
