"""Seedable uniform stream shared by every sampler in the package.

A :class:`RandomSource` wraps a NumPy ``Generator`` (PCG64, period 2**128)
together with a small ``int64`` array of instrumentation counters.  Compiled
kernels receive both objects and bump the counters in place, so operation
counts survive the trip through numba without any global state.
"""

from __future__ import annotations

import numpy as np

# Counter slots.  Kernels index ``counters`` with these constants.
DRAWS = 0  # uniform variates consumed (one per gen.random()/gen.integers())
NAIVE_THROWS = 1  # balls placed or removed one at a time
SPECIAL_ALLOCS = 2  # sequentially simulated collision pairs
CASE_A = 3
CASE_B = 4
CASE_C = 5
CASE_A_TOP = 6  # Case A at the outermost level of a generate call
CASE_B_TOP = 7
MAX_DEPTH = 8  # deepest Case-C chain seen in one generate call
MAX_BLOCK_SPECIALS = 9
BLOCKS = 10
POISSONIZATIONS = 11
N_COUNTERS = 12

COUNTER_NAMES = (
    "draws",
    "naive_throws",
    "special_allocs",
    "case_a",
    "case_b",
    "case_c",
    "case_a_top",
    "case_b_top",
    "max_depth",
    "max_block_specials",
    "blocks",
    "poissonizations",
)

SEED_MASK = (1 << 64) - 1


class RandomSource:
    """A seeded stream of Uniform[0, 1) variates plus operation counters.

    Two sources built from the same seed produce identical streams.  A source
    is single-owner: do not share one between threads.
    """

    def __init__(self, seed: int = 0):
        seed = int(seed)
        if seed < 0 or seed > SEED_MASK:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))
        self.counters = np.zeros(N_COUNTERS, dtype=np.int64)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, draws={self.draws})"

    def uniform(self) -> float:
        self.counters[DRAWS] += 1
        return float(self.generator.random())

    @property
    def draws(self) -> int:
        return int(self.counters[DRAWS])

    def stats(self) -> dict[str, int]:
        return {name: int(v) for name, v in zip(COUNTER_NAMES, self.counters)}

    def reset_counters(self) -> None:
        self.counters[:] = 0

    def spawn(self, index: int) -> "RandomSource":
        """Independent source for trial ``index`` (seeded ``seed + index``)."""
        return RandomSource((self.seed + index) & SEED_MASK)


def as_source(rng) -> RandomSource:
    """Coerce ``None``/int/RandomSource into a RandomSource."""
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(np.random.SeedSequence().entropy & SEED_MASK)
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng))
    raise TypeError(f"expected RandomSource or int seed, got {type(rng).__name__}")
