"""Maximum load of One-Choice, Two-Choice and Threshold as n grows.

    python3 demos/power_of_two.py --max-bins 1e7 --runs 5
"""

import argparse
import math
import time

import numpy as np

from fastbins import RandomSource, one_choice, simulate_twosample_fast, threshold, two_choice


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-bins", type=float, default=1e7)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rules = [one_choice(), two_choice(), threshold(1)]
    print(f"{'n':>10} " + " ".join(f"{q.name:>12}" for q in rules) + f" {'log2 ln n':>10} {'secs':>6}")
    n = 10**3
    while n <= args.max_bins:
        t = time.perf_counter()
        means = []
        for q in rules:
            ks = [simulate_twosample_fast(n, n, q, RandomSource(args.seed + i)).max_load
                  for i in range(args.runs)]
            means.append(np.mean(ks))
        secs = time.perf_counter() - t
        print(f"{n:>10} " + " ".join(f"{k:>12.1f}" for k in means)
              + f" {math.log2(math.log(n)):>10.2f} {secs:>6.1f}")
        n *= 10


if __name__ == "__main__":
    main()
