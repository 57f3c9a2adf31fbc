"""Estimator against the exact solver on small graphs."""

import argparse
import time
from fractions import Fraction

from moranfp.estimator import estimate_fixation
from moranfp.exact import fixation_probability_exact
from moranfp.families import complete, cycle, double_star, random_connected


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", default="2")
    ap.add_argument("--eps", default="1/5")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    r, eps = Fraction(args.r), Fraction(args.eps)

    graphs = {
        "K_2": complete(2).graph,
        "K_8": complete(8).graph,
        "C_5": cycle(5).graph,
        "C_12": cycle(12).graph,
        "D_3": double_star(3).graph,
        "D_8": double_star(8).graph,
        "G(12, .3)": random_connected(12, 0.3, 1).graph,
    }
    print(f"r={r}, eps={eps}")
    print(f"{'graph':>10} {'N':>6} {'P':>6} {'estimate':>9} {'exact':>9} {'rel err':>8} {'steps':>9} {'secs':>6}")
    for name, g in graphs.items():
        t0 = time.time()
        est = estimate_fixation(g, r, eps, seed=args.seed)
        dt = time.time() - t0
        ex = fixation_probability_exact(g, r).value
        p = est.params
        print(f"{name:>10} {p.N:>6} {str(p.P):>6} {est.value:>9.4f} {ex:>9.4f} {abs(est.value - ex) / ex:>8.3f} "
              f"{est.total_active_steps:>9} {dt:>6.2f}")


if __name__ == "__main__":
    main()
