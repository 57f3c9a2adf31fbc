"""Suppressor experiments: fixation on G_{k,a} against 1/n, and the sigma check on H_{a,k}."""

import argparse
import time

from moranfp.audit import directed_audit, sigma_audit
from moranfp.estimator import monte_carlo_fixation
from moranfp.families import dir_suppressor, default_dir_a, default_undir_a, undir_suppressor


def directed(args):
    a = args.a or default_dir_a(args.r)
    print(f"G_(k,{a}), r={args.r}, {args.runs} runs per k")
    print(f"{'k':>4} {'n':>6} {'f':>9} {'n*f':>7} {'ci':>21}")
    for k in [int(x) for x in args.ks.split(",")]:
        g = dir_suppressor(k, a).graph
        mc = monte_carlo_fixation(g, args.r, args.runs, seed=args.seed, jobs=args.jobs)
        print(f"{k:>4} {g.n:>6} {mc.value:>9.5f} {g.n * mc.value:>7.2f}   [{mc.ci_low:.5f}, {mc.ci_high:.5f}]")
    k = max(int(x) for x in args.ks.split(","))
    for level in (k // 2, k):
        c = directed_audit(k, a, args.r, level=level, runs=args.runs, seed=args.seed, jobs=args.jobs)
        print(f"start X_{level}: freq {c.frequency:.2e}, bound {c.bound:.3g}, ok={c.ok}")


def undirected(args):
    a = default_undir_a(args.r)
    t0 = time.time()
    h = undir_suppressor(a, args.k, args.r)
    print(f"H_({a},{args.k}): n={h.graph.n}, m={h.graph.m} (built in {time.time() - t0:.1f}s)")
    checks = sigma_audit(h, args.r, samples=args.samples, seed=args.seed)
    worst = max(c.expected_change for c in checks)
    print(f"{len(checks)} states, {sum(c.ok for c in checks)} with E[dsigma] <= 0, max {float(worst):.3g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, default=2.0)
    ap.add_argument("--a", type=int, default=None, help="directed width (default ceil(4r))")
    ap.add_argument("--ks", default="4,8,16,32")
    ap.add_argument("--k", type=int, default=28, help="H_{a,k} size")
    ap.add_argument("--runs", type=int, default=20000)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--skip-undirected", action="store_true")
    args = ap.parse_args()
    directed(args)
    if not args.skip_undirected:
        undirected(args)


if __name__ == "__main__":
    main()
