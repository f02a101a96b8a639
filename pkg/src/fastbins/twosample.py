"""TwoSample(Q) load-balancing processes, naive and block-simulated.

Each step samples two bins ``i1, i2`` uniformly and independently and puts
the ball into ``i1`` if ``Q(load(i1), load(i2)) = 0``, else into ``i2``.

The fast engine processes the steps in blocks of ``M = ceil(sqrt(n) / 4)``
pairs.  Within a block most sampled bins are hit exactly once, so their
decision depends only on the loads at the start of the block and they can
be moved between load classes in bulk.  The few bins sampled two or more
times ("special" bins) are tracked individually and simulated pair by pair
in a random order.  Per block:

1. ``generate_block_counts``: split the block's first and second samples
   over load classes, generate per-class cardinality vectors, and combine
   them into ``Z[l, x, y]``.
2. ``pair_samples``: match first-sample occurrences to second-sample
   occurrences uniformly at random; special occurrences one at a time,
   the rest in bulk through multivariate hypergeometric draws.
3. ``apply_batches`` and ``simulate_specials``: update the load classes.

``simulate_count_thinning`` handles the threshold-on-selection-count
variant with two rounds of balls-into-bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .cardinalities import (
    _auto_kstar, _check_balls, _check_bins, _combine, _combine_sum, _generate,
    outcome_key,
)
from .errors import InvariantError, ParameterError
from .rng import (
    BLOCKS, MAX_BLOCK_SPECIALS, NAIVE_THROWS, SPECIAL_ALLOCS, RandomSource,
    as_source,
)
from .variates import (
    _binomial_pq, _multinomial_weights, _mvhyper, _randint, _uniform,
)

__all__ = [
    "BlockPlan",
    "DecisionFunction",
    "LoadState",
    "apply_batches",
    "block_size",
    "generate_block_counts",
    "inner_kstar",
    "naive_count_thinning",
    "naive_twosample",
    "one_choice",
    "pair_samples",
    "simulate_count_thinning",
    "simulate_many",
    "simulate_specials",
    "simulate_twosample_fast",
    "tabulated",
    "threshold",
    "two_choice",
]


@dataclass(frozen=True)
class LoadState:
    """Bins grouped by load: ``classes[l]`` bins hold exactly ``l`` balls."""

    n: int
    balls: int
    classes: dict = field(default_factory=dict)

    def __post_init__(self):
        classes = {int(k): int(v) for k, v in sorted(self.classes.items()) if v}
        if any(k < 0 or v < 0 for k, v in classes.items()):
            raise ParameterError(f"invalid load classes {classes}")
        if sum(classes.values()) != self.n:
            raise ParameterError(f"classes {classes} do not cover n={self.n} bins")
        if sum(k * v for k, v in classes.items()) != self.balls:
            raise ParameterError(f"classes {classes} do not hold {self.balls} balls")
        object.__setattr__(self, "classes", classes)

    @classmethod
    def empty(cls, n: int) -> "LoadState":
        return cls(n, 0, {0: n})

    @classmethod
    def from_counts(cls, counts) -> "LoadState":
        """Build from a dense vector ``counts[l]``."""
        classes = {l: int(c) for l, c in enumerate(counts) if c}
        return cls(sum(classes.values()), sum(l * c for l, c in classes.items()), classes)

    def to_counts(self) -> np.ndarray:
        out = np.zeros(self.max_load + 1, dtype=np.int64)
        for l, c in self.classes.items():
            out[l] = c
        return out

    @property
    def max_load(self) -> int:
        return max(self.classes)

    def key(self) -> str:
        return outcome_key(self.to_counts())


# --------------------------------------------------------------------------
# decision functions

ONE_CHOICE = 0
TWO_CHOICE = 1
THRESHOLD = 2
TABLE = 3

_NO_TABLE = np.zeros((1, 1))


@njit(cache=True)
def _prob_second(kind, f, table, l1, l2):
    """Probability that the ball goes to the second sample."""
    if kind == ONE_CHOICE:
        return 0.0
    if kind == TWO_CHOICE:
        if l1 < l2:
            return 0.0
        if l1 > l2:
            return 1.0
        return 0.5
    if kind == THRESHOLD:
        return 0.0 if l1 <= f else 1.0
    r = min(l1, table.shape[0] - 1)
    c = min(l2, table.shape[1] - 1)
    return table[r, c]


@dataclass(frozen=True)
class DecisionFunction:
    """A load-only rule ``Q(l1, l2) -> {0, 1}`` (0 = first sample).

    Randomized rules are described by ``P(Q = 1)``; deterministic rules
    have probabilities in ``{0, 1}`` only.
    """

    name: str
    kind: int
    f: int = 0
    table: np.ndarray = field(default=_NO_TABLE, repr=False, compare=False)

    def prob_second(self, l1: int, l2: int) -> float:
        return float(_prob_second(self.kind, self.f, self.table, l1, l2))

    def exact_prob_second(self, l1: int, l2: int) -> Fraction:
        return Fraction(self.prob_second(l1, l2))

    def is_random_at(self, l1: int, l2: int) -> bool:
        return 0.0 < self.prob_second(l1, l2) < 1.0

    def __call__(self, l1: int, l2: int, rng: RandomSource | None = None) -> int:
        p = self.prob_second(l1, l2)
        if p <= 0.0:
            return 0
        if p >= 1.0:
            return 1
        return int(as_source(rng).uniform() < p)


def one_choice() -> DecisionFunction:
    """Always the first sample; the process reduces to balls-into-bins."""
    return DecisionFunction("one-choice", ONE_CHOICE)


def two_choice() -> DecisionFunction:
    """The less loaded of the two samples, ties broken by a fair coin."""
    return DecisionFunction("two-choice", TWO_CHOICE)


def threshold(f: int) -> DecisionFunction:
    """The first sample if its load is at most ``f``, else the second."""
    if int(f) != f or f < 0:
        raise ParameterError(f"threshold must be a non-negative integer, got {f!r}")
    return DecisionFunction(f"threshold:{int(f)}", THRESHOLD, int(f))


def tabulated(name: str, table) -> DecisionFunction:
    """Rule given by ``table[l1][l2] = P(Q = 1)``.

    Loads past the table's edge use the last row/column.
    """
    table = np.array(table, dtype=np.float64)
    if table.ndim != 2 or table.size == 0 or ((table < 0) | (table > 1)).any():
        raise ParameterError("table must be a non-empty 2-D array of probabilities")
    table.setflags(write=False)
    return DecisionFunction(name, TABLE, 0, table)


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _choose(gen, ctr, kind, f, table, l1, l2):
    """True if the ball goes to the second sample."""
    p = _prob_second(kind, f, table, l1, l2)
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return _uniform(gen, ctr) < p


@njit(cache=True)
def _naive_run(gen, ctr, loads, m, kind, f, table):
    n = loads.shape[0]
    for _ in range(m):
        i1 = _randint(gen, ctr, n)
        i2 = _randint(gen, ctr, n)
        if _choose(gen, ctr, kind, f, table, loads[i1], loads[i2]):
            loads[i2] += 1
        else:
            loads[i1] += 1
    ctr[NAIVE_THROWS] += m
    return np.bincount(loads).astype(np.int64)


@njit(cache=True)
def _naive_thinning_run(gen, ctr, loads, selected, m, f):
    n = loads.shape[0]
    for _ in range(m):
        i1 = _randint(gen, ctr, n)
        selected[i1] += 1
        if selected[i1] <= f:
            loads[i1] += 1
        else:
            loads[_randint(gen, ctr, n)] += 1
    ctr[NAIVE_THROWS] += m
    return np.bincount(loads).astype(np.int64)


@njit(cache=True)
def _block_counts(gen, ctr, cls, block, kstar):
    """Nonzero ``Z[l, x, y]`` entries with ``x + y >= 1`` as rows (l, x, y, count)."""
    size = cls.shape[0]
    first = np.zeros(size, dtype=np.int64)
    second = np.zeros(size, dtype=np.int64)
    _multinomial_weights(gen, ctr, block, cls, first)
    _multinomial_weights(gen, ctr, block, cls, second)
    rows = []
    for l in range(size):
        if first[l] == 0 and second[l] == 0:
            continue
        nl = cls[l]
        kf = kstar if kstar > 0.0 else _auto_kstar(nl, first[l])
        ks = kstar if kstar > 0.0 else _auto_kstar(nl, second[l])
        fx = _generate(gen, ctr, nl, first[l], kf)
        sy = _generate(gen, ctr, nl, second[l], ks)
        z = _combine(gen, ctr, fx, sy)
        for x in range(z.shape[0]):
            for y in range(z.shape[1]):
                if (x > 0 or y > 0) and z[x, y] > 0:
                    rows.append((np.int64(l), np.int64(x), np.int64(y), z[x, y]))
    out = np.empty((len(rows), 4), dtype=np.int64)
    for i in range(len(rows)):
        r = rows[i]
        out[i, 0] = r[0]
        out[i, 1] = r[1]
        out[i, 2] = r[2]
        out[i, 3] = r[3]
    return out


@njit(cache=True)
def _pick_class(gen, ctr, weights, total):
    r = _randint(gen, ctr, total)
    l = 0
    acc = weights[0]
    while r >= acc:
        l += 1
        acc += weights[l]
    return l


@njit(cache=True)
def _pair(gen, ctr, entries, size):
    """Match first and second occurrences of one block.

    Returns ``(pairs, loads, batch)``: special pairs as tracked-bin ids, the
    block-start load of every tracked bin, and bulk pairs as rows
    ``(l1, l2, count)``.
    """
    single_first = np.zeros(size, dtype=np.int64)
    single_second = np.zeros(size, dtype=np.int64)
    n_tracked = 0
    n_first = 0
    n_second = 0
    for i in range(entries.shape[0]):
        l, x, y, c = entries[i, 0], entries[i, 1], entries[i, 2], entries[i, 3]
        if x + y >= 2:
            n_tracked += c
            n_first += c * x
            n_second += c * y
        elif x == 1:
            single_first[l] += c
        else:
            single_second[l] += c
    cap = n_tracked + n_first + n_second
    loads = np.empty(cap, dtype=np.int64)
    first_occ = np.empty(n_first, dtype=np.int64)
    second_occ = np.empty(n_second, dtype=np.int64)
    t = 0
    fi = 0
    si = 0
    for i in range(entries.shape[0]):
        l, x, y, c = entries[i, 0], entries[i, 1], entries[i, 2], entries[i, 3]
        if x + y < 2:
            continue
        for _ in range(c):
            loads[t] = l
            for _ in range(x):
                first_occ[fi] = t
                fi += 1
            for _ in range(y):
                second_occ[si] = t
                si += 1
            t += 1

    n_pairs = n_first + n_second
    pairs = np.empty((n_pairs, 2), dtype=np.int64)
    p = 0
    free_first = single_first.sum()
    free_second = single_second.sum()
    left = n_second
    # each special first occurrence takes a uniform partner among all
    # second occurrences still unmatched
    for i in range(n_first):
        r = _randint(gen, ctr, left + free_second)
        if r < left:
            partner = second_occ[r]
            second_occ[r] = second_occ[left - 1]
            left -= 1
        else:
            l = _pick_class(gen, ctr, single_second, free_second)
            single_second[l] -= 1
            free_second -= 1
            loads[t] = l
            partner = t
            t += 1
        pairs[p, 0] = first_occ[i]
        pairs[p, 1] = partner
        p += 1
    # leftover special second occurrences meet single first samples
    for i in range(left):
        l = _pick_class(gen, ctr, single_first, free_first)
        single_first[l] -= 1
        free_first -= 1
        loads[t] = l
        pairs[p, 0] = t
        pairs[p, 1] = second_occ[i]
        t += 1
        p += 1
    if free_first != free_second:
        raise InvariantError("unmatched sample counts in block pairing")

    batch = []
    row = np.zeros(size, dtype=np.int64)
    last = size - 1
    while last >= 0 and single_first[last] == 0:
        last -= 1
    for l1 in range(last + 1):
        d = single_first[l1]
        if d == 0:
            continue
        if l1 == last:
            row[:] = single_second
        else:
            _mvhyper(gen, ctr, single_second, d, row)
        for l2 in range(size):
            if row[l2] > 0:
                batch.append((np.int64(l1), np.int64(l2), row[l2]))
                single_second[l2] -= row[l2]
    out = np.empty((len(batch), 3), dtype=np.int64)
    for i in range(len(batch)):
        b = batch[i]
        out[i, 0] = b[0]
        out[i, 1] = b[1]
        out[i, 2] = b[2]
    return pairs[:p], loads[:t].copy(), out


@njit(cache=True)
def _batch_deltas(gen, ctr, batch, delta, kind, f, table):
    for i in range(batch.shape[0]):
        l1, l2, c = batch[i, 0], batch[i, 1], batch[i, 2]
        p = _prob_second(kind, f, table, l1, l2)
        if p <= 0.0 or l1 == l2:
            # with equal loads both choices move a bin from l1 to l1 + 1
            to_second = 0
        elif p >= 1.0:
            to_second = c
        else:
            to_second = _binomial_pq(gen, ctr, c, p, 1.0 - p)
        delta[l1] -= c - to_second
        delta[l1 + 1] += c - to_second
        delta[l2] -= to_second
        delta[l2 + 1] += to_second


@njit(cache=True)
def _special_deltas(gen, ctr, pairs, loads, delta, kind, f, table):
    count = pairs.shape[0]
    order = np.arange(count)
    for i in range(count - 1, 0, -1):
        j = _randint(gen, ctr, i + 1)
        order[i], order[j] = order[j], order[i]
    final = loads.copy()
    for i in range(count):
        a = pairs[order[i], 0]
        b = pairs[order[i], 1]
        if a == b:
            final[a] += 1
        elif _choose(gen, ctr, kind, f, table, final[a], final[b]):
            final[b] += 1
        else:
            final[a] += 1
    ctr[SPECIAL_ALLOCS] += count
    if count > ctr[MAX_BLOCK_SPECIALS]:
        ctr[MAX_BLOCK_SPECIALS] = count
    for t in range(loads.shape[0]):
        delta[loads[t]] -= 1
        delta[final[t]] += 1


@njit(cache=True)
def _apply(cls, delta):
    out = cls.copy()
    for l in range(delta.shape[0]):
        out[l] += delta[l]
        if out[l] < 0:
            raise InvariantError("load class underflow")
    k = out.shape[0]
    while k > 1 and out[k - 1] == 0:
        k -= 1
    return out[:k].copy()


@njit(cache=True)
def _fast_run(gen, ctr, n, m, kind, f, table, kstar, block):
    cls = np.zeros(1, dtype=np.int64)
    cls[0] = n
    done = np.int64(0)
    while done < m:
        size = min(block, m - done)
        width = cls.shape[0] + size + 1
        padded = np.zeros(width, dtype=np.int64)
        padded[:cls.shape[0]] = cls
        entries = _block_counts(gen, ctr, cls, size, kstar)
        pairs, loads, batch = _pair(gen, ctr, entries, cls.shape[0])
        delta = np.zeros(width, dtype=np.int64)
        _batch_deltas(gen, ctr, batch, delta, kind, f, table)
        _special_deltas(gen, ctr, pairs, loads, delta, kind, f, table)
        cls = _apply(padded, delta)
        done += size
        ctr[BLOCKS] += 1
        total = np.int64(0)
        balls = np.int64(0)
        for l in range(cls.shape[0]):
            total += cls[l]
            balls += l * cls[l]
        if total != n or balls != done:
            raise InvariantError("block broke ball or bin conservation")
    return cls


@njit(cache=True)
def _thinning_run(gen, ctr, n, m, f, kstar):
    first = _generate(gen, ctr, n, m, kstar if kstar > 0.0 else _auto_kstar(n, m))
    kept = np.zeros(min(first.shape[0], f + 1), dtype=np.int64)
    overflow = np.int64(0)
    for j in range(first.shape[0]):
        if j > f:
            kept[f] += first[j]
            overflow += (j - f) * first[j]
        else:
            kept[j] += first[j]
    second = _generate(gen, ctr, n, overflow,
                       kstar if kstar > 0.0 else _auto_kstar(n, overflow))
    return _combine_sum(gen, ctr, kept, second)


@njit(cache=True)
def _fast_many(gen, ctr, n, m, kind, f, table, kstar, block, out):
    for t in range(out.shape[0]):
        c = _fast_run(gen, ctr, n, m, kind, f, table, kstar, block)
        out[t, :c.shape[0]] = c


@njit(cache=True)
def _naive_many(gen, ctr, n, m, kind, f, table, out):
    loads = np.zeros(n, dtype=np.int64)
    for t in range(out.shape[0]):
        loads[:] = 0
        c = _naive_run(gen, ctr, loads, m, kind, f, table)
        out[t, :c.shape[0]] = c


@njit(cache=True)
def _thinning_many(gen, ctr, n, m, f, kstar, out):
    for t in range(out.shape[0]):
        c = _thinning_run(gen, ctr, n, m, f, kstar)
        out[t, :c.shape[0]] = c


@njit(cache=True)
def _naive_thinning_many(gen, ctr, n, m, f, out):
    loads = np.zeros(n, dtype=np.int64)
    selected = np.zeros(n, dtype=np.int64)
    for t in range(out.shape[0]):
        loads[:] = 0
        selected[:] = 0
        c = _naive_thinning_run(gen, ctr, loads, selected, m, f)
        out[t, :c.shape[0]] = c


# --------------------------------------------------------------------------
# public API


def block_size(n: int) -> int:
    """Pairs per block, ``max(1, ceil(sqrt(n) / 4))``."""
    return max(1, math.ceil(math.sqrt(n) / 4))


def inner_kstar(n: int) -> float:
    """The textbook work parameter for per-class generator calls, ``8 (ln n)**5``.

    At practical ``n`` this exceeds every per-class sample count, so each
    call falls back to direct throwing and a run costs Theta(m) draws.  The
    engines therefore default to :func:`~fastbins.cardinalities.auto_kstar`
    per class; pass this value as ``kstar`` to use the textbook setting.
    """
    return max(1.0, 8.0 * math.log(n) ** 5)


def _resolve_inner(kstar):
    # 0.0 tells the kernels to pick a work parameter per class
    if kstar is None:
        return 0.0
    kstar = float(kstar)
    if not kstar >= 1.0:
        raise ParameterError(f"kstar must be >= 1, got {kstar}")
    return kstar


def _rule_args(q: DecisionFunction):
    return q.kind, q.f, q.table


def naive_twosample(n: int, m: int, q: DecisionFunction, rng: RandomSource) -> LoadState:
    """Run the process step by step on an explicit load array.  Theta(n + m)."""
    n = _check_bins(n)
    m = _check_balls(m)
    rng = as_source(rng)
    loads = np.zeros(n, dtype=np.int32 if m < 2**31 else np.int64)
    counts = _naive_run(rng.generator, rng.counters, loads, m, *_rule_args(q))
    return LoadState.from_counts(counts)


def simulate_twosample_fast(n: int, m: int, q: DecisionFunction, rng: RandomSource,
                            kstar: float | None = None) -> LoadState:
    """Block simulation of TwoSample(q); same law as :func:`naive_twosample`.

    ``kstar`` is the work parameter of the per-class generator calls;
    ``None`` picks one per class (see :func:`inner_kstar`).
    """
    n = _check_bins(n)
    m = _check_balls(m)
    rng = as_source(rng)
    counts = _fast_run(rng.generator, rng.counters, n, m, *_rule_args(q),
                       _resolve_inner(kstar), block_size(n))
    return LoadState.from_counts(counts)


def simulate_count_thinning(n: int, m: int, f: int, rng: RandomSource,
                            kstar: float | None = None) -> LoadState:
    """Thinning on selection counts in two rounds of balls-into-bins.

    A bin accepts its first ``f`` selections as first sample; every ball
    beyond that goes to an independent uniform bin.  Round one generates
    the selection counts, round two re-throws the overflow.
    """
    n = _check_bins(n)
    m = _check_balls(m)
    f = _check_balls(f)
    rng = as_source(rng)
    counts = _thinning_run(rng.generator, rng.counters, n, m, f, _resolve_inner(kstar))
    return LoadState.from_counts(counts)


def naive_count_thinning(n: int, m: int, f: int, rng: RandomSource) -> LoadState:
    """Step-by-step oracle for :func:`simulate_count_thinning`."""
    n = _check_bins(n)
    m = _check_balls(m)
    f = _check_balls(f)
    rng = as_source(rng)
    loads = np.zeros(n, dtype=np.int64)
    selected = np.zeros(n, dtype=np.int64)
    counts = _naive_thinning_run(rng.generator, rng.counters, loads, selected, m, f)
    return LoadState.from_counts(counts)


def simulate_many(n: int, m: int, q, trials: int, rng: RandomSource,
                  engine: str = "fast", kstar=None) -> np.ndarray:
    """Final load-class vectors of ``trials`` runs as zero-padded rows.

    ``q`` is a DecisionFunction, or an int ``f`` for count thinning.
    """
    n = _check_bins(n)
    m = _check_balls(m)
    rng = as_source(rng)
    out = np.zeros((int(trials), m + 1), dtype=np.int64)
    gen, ctr = rng.generator, rng.counters
    if isinstance(q, DecisionFunction):
        if engine == "fast":
            _fast_many(gen, ctr, n, m, *_rule_args(q), _resolve_inner(kstar),
                       block_size(n), out)
        elif engine == "naive":
            _naive_many(gen, ctr, n, m, *_rule_args(q), out)
        else:
            raise ParameterError(f"unknown engine {engine!r}")
    else:
        f = _check_balls(q)
        if engine == "fast":
            _thinning_many(gen, ctr, n, m, f, _resolve_inner(kstar), out)
        elif engine == "naive":
            _naive_thinning_many(gen, ctr, n, m, f, out)
        else:
            raise ParameterError(f"unknown engine {engine!r}")
    return out


# --------------------------------------------------------------------------
# block steps, exposed one at a time


@dataclass(frozen=True)
class BlockPlan:
    """One block after pairing.

    ``pairs[i] = (a, b)`` are tracked-bin ids of a special pair (first,
    second); ``loads[a]`` is bin ``a``'s load at block start.  ``batch`` rows
    ``(l1, l2, count)`` count pairs of untracked, once-sampled bins.
    """

    pairs: np.ndarray
    loads: np.ndarray
    batch: np.ndarray

    @property
    def block_size(self) -> int:
        return int(self.pairs.shape[0] + self.batch[:, 2].sum())

    @property
    def specials(self) -> list:
        """Special pairs as ``((id, load), (id, load))``."""
        return [((int(a), int(self.loads[a])), (int(b), int(self.loads[b])))
                for a, b in self.pairs]


def generate_block_counts(state: LoadState, block: int, rng: RandomSource,
                          kstar: float | None = None) -> dict:
    """Per-class joint sample counts of one block.

    Returns ``{l: Z_l}`` where ``Z_l[x, y]`` counts load-``l`` bins sampled
    ``x`` times as first and ``y`` times as second sample.  Classes not
    sampled at all are omitted.
    """
    if int(block) != block or block < 1:
        raise ParameterError(f"block size must be a positive integer, got {block!r}")
    rng = as_source(rng)
    cls = state.to_counts()
    entries = _block_counts(rng.generator, rng.counters, cls, int(block),
                            _resolve_inner(kstar))
    z = {}
    for l, x, y, c in entries.tolist():
        if l not in z:
            z[l] = {}
        z[l][x, y] = c
    out = {}
    for l, cells in z.items():
        rows = max(x for x, _ in cells) + 1
        cols = max(y for _, y in cells) + 1
        mat = np.zeros((rows, cols), dtype=np.int64)
        for (x, y), c in cells.items():
            mat[x, y] = c
        mat[0, 0] = int(cls[l]) - int(mat.sum())
        out[l] = mat
    return out


def _entries(z: dict) -> np.ndarray:
    rows = []
    for l in sorted(z):
        mat = np.asarray(z[l])
        for x in range(mat.shape[0]):
            for y in range(mat.shape[1]):
                if (x or y) and mat[x, y]:
                    rows.append((l, x, y, int(mat[x, y])))
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def pair_samples(z: dict, rng: RandomSource) -> BlockPlan:
    """Pair the block's first and second samples uniformly at random.

    Bins sampled two or more times in total are tracked individually; each
    of their occurrences gets a uniform partner among the unmatched
    occurrences of the other stream.  Everything left is matched in bulk.
    """
    rng = as_source(rng)
    entries = _entries(z)
    size = max(z, default=0) + 1
    pairs, loads, batch = _pair(rng.generator, rng.counters, entries, size)
    return BlockPlan(pairs, loads, batch)


def _with_delta(state: LoadState, delta: np.ndarray) -> LoadState:
    cls = state.to_counts()
    padded = np.zeros(max(cls.shape[0], delta.shape[0]), dtype=np.int64)
    padded[:cls.shape[0]] = cls
    return LoadState.from_counts(_apply(padded, delta))


def apply_batches(state: LoadState, plan: BlockPlan, q: DecisionFunction,
                  rng: RandomSource) -> LoadState:
    """Move every bulk pair's chosen bin up one load class."""
    rng = as_source(rng)
    width = state.max_load + int(plan.batch[:, 1].max(initial=0)) + 2
    delta = np.zeros(width, dtype=np.int64)
    _batch_deltas(rng.generator, rng.counters, plan.batch, delta, *_rule_args(q))
    return _with_delta(state, delta)


def simulate_specials(state: LoadState, plan: BlockPlan, q: DecisionFunction,
                      rng: RandomSource) -> LoadState:
    """Allocate the special pairs one by one in a uniformly random order."""
    rng = as_source(rng)
    width = max(state.max_load, int(plan.loads.max(initial=0))) + len(plan.pairs) + 2
    delta = np.zeros(width, dtype=np.int64)
    _special_deltas(rng.generator, rng.counters, plan.pairs, plan.loads, delta,
                    *_rule_args(q))
    return _with_delta(state, delta)
