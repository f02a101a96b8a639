"""Exact small-case distributions, outcome histograms and chi-square tests.

Outcomes are identified by the canonical key of their load-class vector,
``"load:count"`` pairs in increasing load order, e.g. ``"0:1,2:1"`` for two
bins holding 0 and 2 balls.  Bins are exchangeable, so this key loses
nothing the algorithms promise.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple

import numpy as np
from scipy.stats import chi2

from .cardinalities import outcome_key
from .errors import CapacityError, ParameterError

__all__ = [
    "ChiSquareResult",
    "ExactDistribution",
    "OutcomeHistogram",
    "chi_square_test",
    "exact_cardinality_distribution",
    "exact_count_thinning_distribution",
    "exact_twosample_distribution",
    "POOL_THRESHOLD",
    "SIGNIFICANCE",
]

SIGNIFICANCE = 1e-3
POOL_THRESHOLD = 5.0
ENUMERATION_CAP = 10**8


@dataclass(frozen=True)
class OutcomeHistogram:
    counts: Mapping[str, int]
    trials: int = field(init=False)

    def __post_init__(self):
        counts = {k: int(v) for k, v in self.counts.items() if v}
        if any(v < 0 for v in counts.values()):
            raise ParameterError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "trials", sum(counts.values()))

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "OutcomeHistogram":
        """Histogram of zero-padded count vectors, one outcome per row."""
        rows = np.asarray(rows)
        if rows.size == 0:
            return cls({})
        base = int(rows.max()) + 1
        if base ** rows.shape[1] < 2**62:
            # one integer per row makes the tally a 1-D unique
            codes = rows @ (base ** np.arange(rows.shape[1], dtype=np.int64))
            uniq, first, freq = np.unique(codes, return_index=True, return_counts=True)
            uniq = rows[first]
        else:
            uniq, freq = np.unique(rows, axis=0, return_counts=True)
        return cls({outcome_key(u): int(c) for u, c in zip(uniq, freq)})

    @classmethod
    def from_outcomes(cls, outcomes) -> "OutcomeHistogram":
        """Histogram of objects with a ``key()`` method."""
        return cls(Counter(o.key() for o in outcomes))

    def frequency(self, key: str) -> float:
        return self.counts.get(key, 0) / self.trials


@dataclass(frozen=True)
class ExactDistribution:
    probs: Mapping[str, Fraction]

    def __post_init__(self):
        probs = {k: v for k, v in self.probs.items() if v}
        total = sum(probs.values())
        if any(v < 0 for v in probs.values()) or abs(total - 1) > 1e-12:
            raise ParameterError(f"probabilities must be non-negative and sum to 1, got {total}")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, key: str):
        return self.probs.get(key, 0)

    def __len__(self):
        return len(self.probs)


class ChiSquareResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float

    def passed(self, alpha: float = SIGNIFICANCE) -> bool:
        return self.p_value > alpha


def _key_of_loads(loads) -> str:
    return outcome_key(np.bincount(np.asarray(loads, dtype=np.int64)))


def exact_cardinality_distribution(n: int, m: int) -> ExactDistribution:
    """Enumerate all ``n**m`` equally likely allocations."""
    if n < 1 or m < 0:
        raise ParameterError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    if n**m > ENUMERATION_CAP:
        raise CapacityError(f"{n}**{m} allocations exceed the enumeration cap")
    tally = Counter()
    loads = [0] * n
    for seq in itertools.product(range(n), repeat=m):
        loads[:] = [0] * n
        for b in seq:
            loads[b] += 1
        tally[_key_of_loads(loads)] += 1
    total = n**m
    return ExactDistribution({k: Fraction(v, total) for k, v in tally.items()})


def _check_states(states, n):
    if len(states) * n * n > ENUMERATION_CAP:
        raise CapacityError("exact state space exceeds the enumeration cap")


def exact_twosample_distribution(n: int, m: int, q, tie_aware: bool = True) -> ExactDistribution:
    """Exact law of the final loads of TwoSample(q), by dynamic programming.

    Each step sums over the ``n**2`` equally likely ordered sample pairs and,
    where ``q`` randomizes, over its coin.  States are sorted load tuples,
    which is lossless because bins are exchangeable.  With
    ``tie_aware=False`` the rule must be deterministic everywhere it is used.
    """
    if n < 1 or m < 0:
        raise ParameterError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    states = {(0,) * n: Fraction(1)}
    pair = Fraction(1, n * n)
    for _ in range(m):
        _check_states(states, n)
        nxt = Counter()
        for loads, p in states.items():
            w = p * pair
            for i1 in range(n):
                for i2 in range(n):
                    p2 = q.exact_prob_second(loads[i1], loads[i2])
                    if 0 < p2 < 1 and not tie_aware:
                        raise ParameterError(f"rule {q.name} randomizes; use tie_aware=True")
                    for target, pt in ((i1, 1 - p2), (i2, p2)):
                        if pt:
                            new = list(loads)
                            new[target] += 1
                            nxt[tuple(sorted(new))] += w * pt
        states = nxt
    out = Counter()
    for loads, p in states.items():
        out[_key_of_loads(loads)] += p
    return ExactDistribution(dict(out))


def exact_count_thinning_distribution(n: int, m: int, f: int) -> ExactDistribution:
    """Exact law of Thinning on selection counts, by dynamic programming.

    A ball goes to its first sample if that bin has been picked as first
    sample at most ``f`` times (this pick included), otherwise to an
    independent uniform bin.  States are sorted ``(selections, load)`` tuples.
    """
    if n < 1 or m < 0 or f < 0:
        raise ParameterError(f"need n >= 1, m >= 0, f >= 0, got {n}, {m}, {f}")
    states = {((0, 0),) * n: Fraction(1)}
    step = Fraction(1, n)
    for _ in range(m):
        _check_states(states, n)
        nxt = Counter()
        for bins, p in states.items():
            for i in range(n):
                sel = list(bins)
                s, load = sel[i]
                sel[i] = (s + 1, load)
                if s + 1 <= f:
                    sel[i] = (s + 1, load + 1)
                    nxt[tuple(sorted(sel))] += p * step
                else:
                    for j in range(n):
                        new = list(sel)
                        new[j] = (new[j][0], new[j][1] + 1)
                        nxt[tuple(sorted(new))] += p * step * step
        states = nxt
    out = Counter()
    for bins, p in states.items():
        out[_key_of_loads([load for _, load in bins])] += p
    return ExactDistribution(dict(out))


def _pool(cells):
    """Merge cells whose expected count is below the threshold.

    ``cells`` holds ``[observed, expected]`` pairs; the small ones are summed
    into one tail cell, which is folded into the smallest regular cell if it
    is still too small itself.
    """
    big = [c for c in cells if c[1] >= POOL_THRESHOLD]
    small = [c for c in cells if c[1] < POOL_THRESHOLD]
    if small:
        tail = [sum(c[0] for c in small), sum(c[1] for c in small)]
        if tail[1] < POOL_THRESHOLD and big:
            i = min(range(len(big)), key=lambda j: big[j][1])
            big[i] = [big[i][0] + tail[0], big[i][1] + tail[1]]
        else:
            big.append(tail)
    return big


def _p_value(statistic: float, dof: int) -> float:
    if dof <= 0:
        return 1.0
    return float(chi2.sf(statistic, dof))


def chi_square_test(observed: OutcomeHistogram, expected) -> ChiSquareResult:
    """Pearson chi-square of ``observed`` against an exact law or a second histogram.

    Cells with expected count below 5 are pooled.  An observed outcome of
    probability zero yields an infinite statistic.
    """
    if observed.trials < 1:
        raise ParameterError("observed histogram is empty")
    if isinstance(expected, OutcomeHistogram):
        return _two_sample(observed, expected)
    trials = observed.trials
    if any(expected[k] == 0 for k in observed.counts):
        return ChiSquareResult(math.inf, max(len(expected) - 1, 0), 0.0)
    # exact fractions until pooling so no probability mass is lost
    cells = [[observed.counts.get(k, 0), p * trials] for k, p in expected.probs.items()]
    cells = _pool(cells)
    statistic = sum(float((o - e) ** 2 / e) for o, e in cells)
    dof = len(cells) - 1
    return ChiSquareResult(statistic, dof, _p_value(statistic, dof))


def _two_sample(a: OutcomeHistogram, b: OutcomeHistogram) -> ChiSquareResult:
    if b.trials < 1:
        raise ParameterError("expected histogram is empty")
    na, nb = a.trials, b.trials
    total = na + nb
    keys = set(a.counts) | set(b.counts)
    # pool on the smaller of the two expected counts per cell
    big, small = [], [0, 0]
    for k in keys:
        oa, ob = a.counts.get(k, 0), b.counts.get(k, 0)
        if min(na, nb) * (oa + ob) / total >= POOL_THRESHOLD:
            big.append([oa, ob])
        else:
            small = [small[0] + oa, small[1] + ob]
    if small[0] + small[1]:
        if min(na, nb) * sum(small) / total < POOL_THRESHOLD and big:
            i = min(range(len(big)), key=lambda j: sum(big[j]))
            big[i] = [big[i][0] + small[0], big[i][1] + small[1]]
        else:
            big.append(small)
    ka, kb = math.sqrt(nb / na), math.sqrt(na / nb)
    statistic = sum((oa * ka - ob * kb) ** 2 / (oa + ob) for oa, ob in big)
    dof = len(big) - 1
    return ChiSquareResult(statistic, dof, _p_value(statistic, dof))
