"""Timing sweeps of the fast and naive engines over a geometric grid of n."""

from __future__ import annotations

import time

import numpy as np

from .cardinalities import generate_bin_cardinalities, naive_cardinalities
from .errors import ParameterError
from .rng import DRAWS, NAIVE_THROWS, SPECIAL_ALLOCS, RandomSource
from .twosample import naive_twosample, simulate_twosample_fast, two_choice

HEADER = ("engine", "n", "m", "median_ns", "p10_ns", "p90_ns", "rng_draws", "naive_ops")


def _cards_fast(n, m, rng):
    generate_bin_cardinalities(n, m, rng)
    return rng.counters[NAIVE_THROWS]


def _cards_naive(n, m, rng):
    naive_cardinalities(n, m, rng)
    return rng.counters[NAIVE_THROWS]


def _two_fast(n, m, rng):
    simulate_twosample_fast(n, m, two_choice(), rng)
    return rng.counters[SPECIAL_ALLOCS]


def _two_naive(n, m, rng):
    naive_twosample(n, m, two_choice(), rng)
    return rng.counters[NAIVE_THROWS]


# each runner returns its naive per-ball operation count
ENGINES = {
    "cardinalities-fast": _cards_fast,
    "cardinalities-naive": _cards_naive,
    "twosample-fast": _two_fast,
    "twosample-naive": _two_naive,
}


def grid(lo: int, hi: int, factor: float) -> list[int]:
    if lo < 1 or hi < lo or factor <= 1:
        raise ParameterError("grid needs 1 <= lo <= hi and factor > 1")
    out = []
    n = float(lo)
    while n <= hi * (1 + 1e-9):
        out.append(int(round(n)))
        n *= factor
    return out


def measure(engine: str, n: int, m: int, trials: int, seed: int) -> dict:
    """Median and 10/90% quantiles of wall time over ``trials`` seeded runs.

    One untimed warm-up run comes first.  Counters are medians per run.
    """
    try:
        run = ENGINES[engine]
    except KeyError:
        raise ParameterError(f"unknown engine {engine!r}") from None
    run(n, m, RandomSource(seed))
    times, draws, ops = [], [], []
    for i in range(trials):
        rng = RandomSource(seed + i)
        t0 = time.perf_counter_ns()
        op = run(n, m, rng)
        times.append(time.perf_counter_ns() - t0)
        draws.append(int(rng.counters[DRAWS]))
        ops.append(int(op))
    p10, med, p90 = np.percentile(times, [10, 50, 90])
    return {
        "engine": engine, "n": n, "m": m,
        "median_ns": int(med), "p10_ns": int(p10), "p90_ns": int(p90),
        "rng_draws": int(np.median(draws)), "naive_ops": int(np.median(ops)),
    }


def sweep(engines, sizes, trials: int, seed: int, balls_per_bin: float = 1.0):
    for engine in engines:
        for n in sizes:
            yield measure(engine, n, int(round(balls_per_bin * n)), trials, seed)
