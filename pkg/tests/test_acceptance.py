"""Acceptance suite: one test per numbered criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``).
"""

import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from moranfp.audit import directed_audit, sigma_audit
from moranfp.engine import (
    RES_EXTINCTION,
    RES_FIXATION,
    RES_THRESHOLD,
    audit_invariants,
    init_active,
    lcm_upto,
    sample_active_transitions,
    sample_naive_transitions,
    threshold_scaled,
)
from moranfp.estimator import (
    early_termination_witness,
    estimate_fixation,
    fpras_params,
    mean_absorption_time,
    monte_carlo_fixation,
    threshold_runs,
)
from moranfp.exact import (
    active_transition_distribution,
    fixation_probability_exact,
    fixation_vector,
    one_step_expected_change,
    transition_distribution,
)
from moranfp.families import complete, cycle, dir_suppressor, double_star, path, random_connected, star, undir_suppressor
from moranfp.graph import average_degree
from moranfp.potential import cut_drift, phi
from moranfp.rng import UniformStream, block_generator

pytestmark = pytest.mark.acceptance


def report(num: int, title: str, ok: bool, detail: str, t0: float) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {title} ({detail}; {time.time() - t0:.1f}s)"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def _states(g):
    full = (1 << g.n) - 1
    for mask in range(1, full):
        yield frozenset(v for v in g.vertices() if mask >> (v - 1) & 1)


def _random_graphs(count, lo, hi, seed):
    rng = block_generator(seed, 99)
    out = []
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        p = float(rng.choice([0.3, 0.5, 0.8]))
        out.append(random_connected(n, p, seed * 1000 + i).graph)
    return out


def _tv(counts: Counter, total: int, dist: dict) -> float:
    keys = set(counts) | set(dist)
    return 0.5 * sum(abs(counts.get(k, 0) / total - float(dist.get(k, 0))) for k in keys)


def test_criterion_01_clique_closed_form():
    t0 = time.time()
    worst = 0.0
    for n in range(2, 7):
        g = complete(n).graph
        for r in (Fraction(1, 2), 1, 2, 5):
            r = Fraction(r)
            want = 1 / n if r == 1 else (1 - 1 / float(r)) / (1 - float(r) ** -n)
            worst = max(worst, abs(fixation_probability_exact(g, r).value - want))
    ok = worst <= 1e-10 and time.time() - t0 < 5
    report(1, "clique closed form", ok, f"max error {worst:.2e}", t0)


def test_criterion_02_neutral_law():
    t0 = time.time()
    worst = 0.0
    for g in _random_graphs(20, 3, 10, seed=2):
        worst = max(worst, abs(fixation_probability_exact(g, 1).value - 1 / g.n))
    ok = worst <= 1e-10 and time.time() - t0 < 30
    report(2, "neutral drift 1/n", ok, f"20 graphs, max error {worst:.2e}", t0)


def test_criterion_03_drift_identity():
    t0 = time.time()
    rng = block_generator(3, 0)
    graphs = _random_graphs(40, 2, 12, seed=3)
    bad = 0
    for i in range(200):
        g = graphs[i % len(graphs)]
        mask = int(rng.integers(1, (1 << g.n) - 1))
        S = frozenset(v for v in g.vertices() if mask >> (v - 1) & 1)
        r = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 8)))
        got = one_step_expected_change(g, r, S, kind="phi").value
        want = (r - 1) / (g.n + (r - 1) * len(S)) * cut_drift(g, S)
        # and by brute enumeration of successors
        brute = sum(p * (phi(g, T) - phi(g, S)) for T, p in transition_distribution(g, r, S).items())
        bad += got != want or got != brute
    report(3, "one-step phi expectation identity", bad == 0, f"200 cases, {bad} mismatches", t0)


def test_criterion_04_active_gain():
    t0 = time.time()
    corpus = {"K3": complete(3).graph, "C4": cycle(4).graph, "D2": double_star(2).graph,
              "S3": star(3).graph, "P4": path(4).graph}
    bad = checked = 0
    slack = None
    for g in corpus.values():
        for r in (Fraction(3, 2), Fraction(2)):
            floor = (r - 1) / ((r + 1) * g.max_degree)
            for S in _states(g):
                gain = sum(p * (phi(g, T) - phi(g, S)) for T, p in active_transition_distribution(g, r, S).items())
                checked += 1
                bad += gain < floor
                slack = gain - floor if slack is None else min(slack, gain - floor)
    ok = bad == 0 and time.time() - t0 < 60
    report(4, "active-step phi gain floor", ok, f"{checked} states, min slack {slack}", t0)


def test_criterion_05_potential_lower_bound():
    t0 = time.time()
    r = 2.0
    bad = 0
    worst = math.inf
    for g in _random_graphs(20, 2, 8, seed=5):
        h, _ = fixation_vector(g, 2)
        delta = g.min_degree
        top = float(phi(g, g.vertices()))
        for mask in range(1, 1 << g.n):
            X = [v for v in g.vertices() if mask >> (v - 1) & 1]
            bound = (1 - r ** (-float(phi(g, X)) * delta)) / (1 - r ** (-top * delta))
            worst = min(worst, h[mask] - bound)
            bad += h[mask] < bound - 1e-9
        uniform = sum(h[1 << (v - 1)] for v in g.vertices()) / g.n
        cor = (r - 1) / (2 * r * float(average_degree(g)))
        worst = min(worst, uniform - cor)
        bad += uniform < cor - 1e-9
    report(5, "potential lower bounds", bad == 0, f"20 graphs, min slack {worst:.3g}", t0)


def test_criterion_06_sampler_fidelity():
    t0 = time.time()
    cases = [(complete(3).graph, [1]), (complete(3).graph, [1, 2]),
             (double_star(2).graph, [1]), (double_star(2).graph, [1, 3, 5]), (double_star(2).graph, [3]),
             (cycle(4).graph, [1]), (cycle(4).graph, [1, 2])]
    N = 10**6
    worst = 0.0
    for seed, (g, S) in enumerate(cases):
        Sset = frozenset(S)
        sp, tg = sample_active_transitions(g, 2, S, N, seed=seed)
        nxt = Counter((Sset | {t}) if s in Sset else (Sset - {t}) for s, t in zip(sp.tolist(), tg.tolist()))
        worst = max(worst, _tv(nxt, N, active_transition_distribution(g, 2, S)))
        sp, tg = sample_naive_transitions(g, 2, S, N, seed=seed)
        nxt = Counter()
        for s, t in zip(sp.tolist(), tg.tolist()):
            if (s in Sset) == (t in Sset):
                nxt[Sset] += 1
            else:
                nxt[(Sset | {t}) if s in Sset else (Sset - {t})] += 1
        worst = max(worst, _tv(nxt, N, transition_distribution(g, 2, S)))
    ok = worst <= 0.005 and time.time() - t0 < 120
    report(6, "sampler fidelity", ok, f"{len(cases)} states x 2 samplers, max TV {worst:.4f}", t0)


def test_criterion_07_invariant_fuzz():
    t0 = time.time()
    rng = UniformStream(7)
    graphs = _random_graphs(25, 5, 50, seed=7)
    steps = violations = 0
    i = 0
    while steps < 10**4:
        g = graphs[i % len(graphs)]
        r = (0.5, 1.0, 2.0, 5.0)[i % 4]
        i += 1
        s = init_active(g, 1 + rng.index(g.n), r=r)
        violations += len(audit_invariants(g, s))
        for _ in range(1000):
            if s.is_absorbed() or steps >= 10**4:
                break
            s.step(rng)
            steps += 1
            violations += len(audit_invariants(g, s))
    report(7, "invariant fuzz", violations == 0, f"{steps} active steps on {len(graphs)} graphs, "
           f"{violations} violations", t0)


def test_criterion_08_fpras_guarantee():
    t0 = time.time()
    eps = Fraction(1, 5)
    rates = {}
    for name, g in (("K2", complete(2).graph), ("C5", cycle(5).graph), ("D3", double_star(3).graph)):
        exact = fixation_probability_exact(g, 2).value
        good = sum(abs(estimate_fixation(g, 2, eps, seed=s).value - exact) <= float(eps) * exact for s in range(200))
        rates[name] = good / 200
    ok = all(v >= 0.6 for v in rates.values()) and time.time() - t0 < 300
    report(8, "estimator accuracy", ok, ", ".join(f"{k} {v:.3f}" for k, v in rates.items()), t0)


def test_criterion_09_step_budget():
    t0 = time.time()
    r = 2
    parts = []
    ok = True
    for name, g in (("C30", cycle(30).graph), ("D8", double_star(8).graph)):
        P = fpras_params(g, r, Fraction(1, 5)).P
        res, steps, phis, lcm = threshold_runs(g, r, P, 2000, seed=9)
        stop_ok = np.all((res == RES_EXTINCTION) | (res == RES_FIXATION) |
                         ((res == RES_THRESHOLD) & (phis >= threshold_scaled(P, lcm.D))))
        mean = steps.mean()
        se = steps.std(ddof=1) / math.sqrt(len(steps))
        bound = 2 * r * (P + 1) * g.max_degree / (r - 1)
        ok &= bool(stop_ok) and mean <= bound + 3 * se
        parts.append(f"{name} P={P} mean {mean:.1f} <= {float(bound):.0f}")
    report(9, "expected steps per run", ok, "; ".join(parts), t0)


def test_criterion_10_early_termination():
    t0 = time.time()
    r = 2
    ok = True
    parts = []
    for name, g in (("D3", double_star(3).graph), ("C5", cycle(5).graph)):
        for P in (1, 2):
            w = early_termination_witness(g, r, P, 4000, seed=10 + P)
            bound = r ** -P
            sigma = math.sqrt(bound * (1 - bound) / max(w.reached, 1))
            ok &= w.reached >= 1000 and w.fraction <= bound + 3 * sigma
            parts.append(f"{name} P={P} {w.extinct_after}/{w.reached}={w.fraction:.3f}")
    report(10, "late extinction after threshold", ok, "; ".join(parts), t0)


def test_criterion_11_double_star_scaling():
    t0 = time.time()
    r = 2
    means = []
    ok = True
    for k in (4, 8, 16):
        g = double_star(k).graph
        t = mean_absorption_time(g, r, 2000, seed=11)
        floor = (r - 1) ** 2 / (2**5 * r**4) * g.n**3
        ok &= t.mean >= floor - 3 * t.stderr
        means.append(t.mean)
    ratios = [b / a for a, b in zip(means, means[1:])]
    ok &= all(4 <= q <= 16 for q in ratios) and time.time() - t0 < 600
    report(11, "double star absorption scaling", ok,
           f"means {', '.join(f'{m:.0f}' for m in means)}; ratios {', '.join(f'{q:.2f}' for q in ratios)}", t0)


def test_criterion_12_sigma_supermartingale():
    t0 = time.time()
    h = undir_suppressor(14, 28, 2)
    checks = sigma_audit(h, 2, samples=100, seed=12, max_size=40)
    bad = sum(not c.ok for c in checks)
    sane = all(0 < c.sigma < 28 and c.state_size <= 40 for c in checks)
    worst = max(c.expected_change for c in checks)
    ok = bad == 0 and sane and len(checks) == 100 and time.time() - t0 < 300
    report(12, "sigma supermartingale", ok, f"{len(checks)} states, max E[dsigma] = {float(worst):.3g}", t0)


def test_criterion_13_directed_suppression():
    t0 = time.time()
    a, r = 8, 2
    chk = directed_audit(15, a, r, level=15, runs=10**5, seed=13)
    bound = 2.0**-10 * a * r
    sigma = math.sqrt(bound * (1 - bound) / chk.runs)
    ok_a = chk.frequency <= bound + 3 * sigma
    f = {}
    for k in (8, 16, 32):
        f[k] = monte_carlo_fixation(dir_suppressor(k, a).graph, r, 20000, seed=130 + k).value
    ratios = [f[16] / f[8], f[32] / f[16]]
    ok_b = all(0.25 <= q <= 1.0 for q in ratios)
    ok = ok_a and ok_b and time.time() - t0 < 900
    report(13, "directed suppression", ok,
           f"X15 freq {chk.frequency:.2e} <= {bound:.4f}; f(k) {', '.join(f'{v:.4f}' for v in f.values())}; "
           f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}", t0)


def test_criterion_14_monotone_in_r():
    t0 = time.time()
    rs = (Fraction(1, 2), 1, Fraction(3, 2), 2, 3)
    bad = 0
    for g in _random_graphs(10, 2, 8, seed=14):
        vals = [fixation_probability_exact(g, r).value for r in rs]
        bad += any(b < a - 1e-10 for a, b in zip(vals, vals[1:]))
    report(14, "fixation nondecreasing in r", bad == 0, f"10 graphs, {bad} violations", t0)


def _prime_factors(x):
    out, p = set(), 2
    while p * p <= x:
        while x % p == 0:
            out.add(p)
            x //= p
        p += 1
    if x > 1:
        out.add(x)
    return out


def test_criterion_15_lcm():
    t0 = time.time()
    bad = 0
    for delta in range(1, 31):
        D = lcm_upto(delta).D
        bad += any(D % k for k in range(1, delta + 1))
        bad += D > 4**delta
        for p in _prime_factors(D):
            bad += all((D // p) % k == 0 for k in range(1, delta + 1))
    report(15, "lcm table", bad == 0, f"delta 1..30, {bad} failures", t0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
