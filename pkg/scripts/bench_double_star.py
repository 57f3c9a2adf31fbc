"""Mean absorption time of the double star D_k over a range of k, with a log-log fit."""

import argparse
import time

import numpy as np

from moranfp.estimator import mean_absorption_time
from moranfp.families import double_star


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="4,8,16,32")
    ap.add_argument("--r", type=float, default=2.0)
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    ks = [int(k) for k in args.sizes.split(",")]
    r = args.r
    floor_c = (r - 1) ** 2 / (2**5 * r**4)
    ns, means = [], []
    print(f"{'k':>4} {'n':>5} {'mean':>12} {'stderr':>9} {'floor':>10} {'secs':>6}")
    for k in ks:
        g = double_star(k).graph
        t0 = time.time()
        t = mean_absorption_time(g, r, args.runs, seed=args.seed, jobs=args.jobs)
        print(f"{k:>4} {g.n:>5} {t.mean:>12.1f} {t.stderr:>9.1f} {floor_c * g.n**3:>10.1f} {time.time() - t0:>6.1f}")
        ns.append(g.n)
        means.append(t.mean)
    if len(ks) > 1:
        slope = np.polyfit(np.log(ns), np.log(means), 1)[0]
        print(f"log-log slope {slope:.3f}")


if __name__ == "__main__":
    main()
