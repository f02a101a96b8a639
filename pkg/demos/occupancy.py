"""Bin cardinalities far beyond what an explicit load array can hold.

    python3 demos/occupancy.py --bins 1e12 --trials 5
"""

import argparse
import math
import time

from fastbins import RandomSource, generate_bin_cardinalities, naive_cardinalities


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--bins", type=float, default=1e12)
    p.add_argument("--balls-per-bin", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    n = int(args.bins)
    m = int(args.balls_per_bin * n)
    scale = math.log(n) / math.log(math.log(n))
    print(f"n={n:.3g} m={m:.3g}  ln n / ln ln n = {scale:.2f}")
    for i in range(args.trials):
        rng = RandomSource(args.seed + i)
        t = time.perf_counter()
        x = generate_bin_cardinalities(n, m, rng)
        ms = (time.perf_counter() - t) * 1e3
        print(f"  trial {i}: max load {x.max_load}, empty fraction {x.counts[0] / n:.6f} "
              f"(e^-m/n = {math.exp(-m / n):.6f}), {ms:.2f} ms, {rng.draws} draws")

    # the explicit-array oracle at a size it can still afford
    small = min(n, 10**7)
    rng = RandomSource(args.seed)
    t = time.perf_counter()
    naive_cardinalities(small, int(args.balls_per_bin * small), rng)
    print(f"naive engine at n={small:.3g}: {(time.perf_counter() - t) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
