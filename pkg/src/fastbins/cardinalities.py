"""Bin-cardinality vectors of m balls in n bins, generated without the bins.

``generate_bin_cardinalities`` draws the vector ``(X_0, ..., X_K)``, where
``X_j`` counts the bins holding exactly ``j`` balls, from the exact
Multinomial(m; 1/n, ..., 1/n) law in time polylogarithmic in ``n``:

1. If ``m <= kstar``, throw the balls directly (base case).
2. Otherwise Poissonize: with ``lam = m - m**0.6`` the per-bin loads are
   i.i.d. Poisson(lam / n), so the cardinalities are a lazy multinomial over
   the Poisson pmf and the realized ball count ``N`` is Poisson(lam).
3. Correct ``N`` to ``m``: add ``m - N`` balls one at a time if the deficit is
   large (Case A, rare), remove ``N - m`` balls one at a time on a surplus
   (Case B, rare), or otherwise generate the deficit recursively and merge
   the two vectors with :func:`combine_and_sum` (Case C).

The recursion of Case C is unrolled into a loop that accumulates the merged
vector; merging independent vectors is associative in distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptyStateError, InvariantError, ParameterError
from .rng import (
    CASE_A, CASE_A_TOP, CASE_B, CASE_B_TOP, CASE_C, MAX_DEPTH, NAIVE_THROWS,
    POISSONIZATIONS, RandomSource, as_source,
)
from .variates import MAX_PARAM, _binomial_pq, _dpois_log, _mvhyper, _randint

__all__ = [
    "CardinalityVector",
    "JointCardinalityMatrix",
    "add_one_ball",
    "auto_kstar",
    "combine_and_sum",
    "combine_and_sum_many",
    "combine_cardinalities",
    "default_kstar",
    "generate_bin_cardinalities",
    "generate_many",
    "naive_cardinalities",
    "naive_many",
    "outcome_key",
    "poissonized_cardinalities",
    "remove_one_ball",
]


def outcome_key(counts) -> str:
    """Canonical ``"load:count"`` key of a cardinality/load-class vector."""
    return ",".join(f"{j}:{int(c)}" for j, c in enumerate(counts) if c)


@dataclass(frozen=True)
class CardinalityVector:
    """``counts[j]`` = number of the ``n`` bins holding exactly ``j`` of ``m`` balls."""

    n: int
    m: int
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not counts or min(counts) < 0:
            raise ParameterError(f"invalid counts {counts}")
        if sum(counts) != self.n:
            raise ParameterError(f"counts {counts} do not sum to n={self.n}")
        if sum(j * c for j, c in enumerate(counts)) != self.m:
            raise ParameterError(f"counts {counts} do not hold m={self.m} balls")
        if counts[-1] == 0:
            raise ParameterError(f"counts {counts} are not trimmed")

    @classmethod
    def from_counts(cls, counts) -> "CardinalityVector":
        counts = [int(c) for c in counts]
        while len(counts) > 1 and counts[-1] == 0:
            counts.pop()
        return cls(sum(counts), sum(j * c for j, c in enumerate(counts)), tuple(counts))

    @property
    def max_load(self) -> int:
        return len(self.counts) - 1

    K = max_load

    def key(self) -> str:
        return outcome_key(self.counts)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)


@dataclass(frozen=True)
class JointCardinalityMatrix:
    """``z[x, y]`` = bins chosen ``x`` times in one sample set and ``y`` in another."""

    n: int
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=np.int64)
        if z.ndim != 2 or (z < 0).any() or int(z.sum()) != self.n:
            raise ParameterError("joint matrix must be a non-negative 2-D array summing to n")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def row_marginals(self) -> np.ndarray:
        return self.z.sum(axis=1)

    def col_marginals(self) -> np.ndarray:
        return self.z.sum(axis=0)

    def summed(self) -> CardinalityVector:
        """Aggregate entries with equal ``x + y``."""
        rows, cols = self.z.shape
        w = np.zeros(rows + cols - 1, dtype=np.int64)
        for x in range(rows):
            w[x:x + cols] += self.z[x]
        return CardinalityVector.from_counts(w)


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _trim(counts, length):
    k = length
    while k > 1 and counts[k - 1] == 0:
        k -= 1
    return counts[:k].copy()


@njit(cache=True)
def _ball_count(counts):
    m = np.int64(0)
    for j in range(counts.shape[0]):
        m += j * counts[j]
    return m


@njit(cache=True)
def _throw_into(gen, ctr, loads, m):
    n = loads.shape[0]
    for _ in range(m):
        loads[_randint(gen, ctr, n)] += 1
    ctr[NAIVE_THROWS] += m
    return np.bincount(loads).astype(np.int64)


@njit(cache=True)
def _throw_sparse(gen, ctr, n, m):
    """Cardinalities of ``m`` uniform throws without materializing the bins."""
    if m == 0:
        out = np.empty(1, dtype=np.int64)
        out[0] = n
        return out
    ids = np.empty(m, dtype=np.int64)
    for i in range(m):
        ids[i] = _randint(gen, ctr, n)
    ctr[NAIVE_THROWS] += m
    ids.sort()
    counts = np.zeros(m + 1, dtype=np.int64)
    run = 1
    distinct = 0
    for i in range(1, m):
        if ids[i] == ids[i - 1]:
            run += 1
        else:
            counts[run] += 1
            distinct += 1
            run = 1
    counts[run] += 1
    distinct += 1
    counts[0] = n - distinct
    return _trim(counts, m + 1)


@njit(cache=True)
def _poisson_tail_ratio(mu, k):
    # sum_{i>=1} prod_{j=1..i} mu / (k + j), i.e. P(Poi >= k+1) / P(Poi = k)
    term = 1.0
    total = 0.0
    for j in range(1, 100000):
        term *= mu / (k + j)
        total += term
        if term <= total * 1e-17:
            break
    return total


@njit(cache=True)
def _poissonize(gen, ctr, n, lam):
    """Cardinalities of n i.i.d. Poisson(lam/n) loads, and their sum N."""
    ctr[POISSONIZATIONS] += 1
    mu = lam / n
    if mu <= 0.0:
        out = np.empty(1, dtype=np.int64)
        out[0] = n
        return out, np.int64(0)
    cap = np.int64(50.0 * max(math.log(n), 1.0) + 2.0 * mu + 64.0)
    buf = np.zeros(cap + 1, dtype=np.int64)
    log_space = mu > 700.0
    p = math.exp(_dpois_log(0, mu)) if log_space else math.exp(-mu)
    s = 0.0
    comp = 0.0
    bins_left = np.int64(n)
    total = np.int64(0)
    k = 0
    while bins_left > 0:
        if k > cap:
            raise InvariantError("Poissonization loop exceeded its iteration cap")
        # hazard h = p_k / P(Poi >= k) and its complement g, both to full precision
        if k == 0:
            h = math.exp(-mu)
            g = -math.expm1(-mu)
        elif k > mu:
            r = _poisson_tail_ratio(mu, k)
            h = 1.0 / (1.0 + r)
            g = r / (1.0 + r)
        else:
            t = 1.0 - (s + comp)
            if t <= p:
                h, g = 1.0, 0.0
            else:
                h = p / t
                g = (t - p) / t
        x = _binomial_pq(gen, ctr, bins_left, h, g)
        buf[k] = x
        bins_left -= x
        total += k * x
        sk = s + p
        if abs(s) >= p:
            comp += (s - sk) + p
        else:
            comp += (p - sk) + s
        s = sk
        k += 1
        if log_space:
            p = math.exp(_dpois_log(k, mu))
        else:
            p = p * mu / k
    return _trim(buf, k), total


@njit(cache=True)
def _add_balls(gen, ctr, counts, n, count):
    size = counts.shape[0]
    buf = np.zeros(size + count, dtype=np.int64)
    buf[:size] = counts
    top = size - 1
    for _ in range(count):
        r = _randint(gen, ctr, n)
        i = 0
        acc = buf[0]
        while r >= acc:
            i += 1
            acc += buf[i]
        buf[i] -= 1
        buf[i + 1] += 1
        if i + 1 > top:
            top = i + 1
    ctr[NAIVE_THROWS] += count
    return buf[:top + 1].copy()


@njit(cache=True)
def _remove_balls(gen, ctr, counts, m, count):
    buf = counts.copy()
    for _ in range(count):
        r = _randint(gen, ctr, m)
        i = 0
        acc = np.int64(0)
        while True:
            i += 1
            acc += i * buf[i]
            if r < acc:
                break
        buf[i] -= 1
        buf[i - 1] += 1
        m -= 1
    ctr[NAIVE_THROWS] += count
    return _trim(buf, buf.shape[0])


@njit(cache=True)
def _combine(gen, ctr, x, y):
    """Joint matrix of two independent cardinality vectors over the same bins."""
    rows = x.shape[0]
    cols = y.shape[0]
    z = np.zeros((rows, cols), dtype=np.int64)
    last = rows - 1
    while last > 0 and x[last] == 0:
        last -= 1
    remaining = y.copy()
    row = np.zeros(cols, dtype=np.int64)
    for r in range(rows):
        d = x[r]
        if d == 0:
            continue
        if r == last:
            z[r, :] = remaining
            break
        _mvhyper(gen, ctr, remaining, d, row)
        for c in range(cols):
            z[r, c] = row[c]
            remaining[c] -= row[c]
    return z


@njit(cache=True)
def _combine_sum(gen, ctr, x, y):
    if y.shape[0] == 1:
        return x.copy()
    if x.shape[0] == 1:
        return y.copy()
    z = _combine(gen, ctr, x, y)
    rows, cols = z.shape
    w = np.zeros(rows + cols - 1, dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            w[r + c] += z[r, c]
    return _trim(w, rows + cols - 1)


@njit(cache=True)
def _auto_kstar(n, m):
    ln = math.log(n) if n > 1 else 0.0
    upper = max(1.0, 8.0 * ln ** 5)
    if n >= 3 and m >= 1:
        inner = 4.0 * n / m * ln
        if inner > 1.0:
            k = 10.0 * ln / math.log(inner)
            return min(max(k, 1.0), upper)
    return upper


@njit(cache=True)
def _generate(gen, ctr, n, m, kstar):
    acc = np.empty(1, dtype=np.int64)
    acc[0] = n
    depth = 0
    top = True
    while True:
        if m <= kstar:
            acc = _combine_sum(gen, ctr, acc, _throw_sparse(gen, ctr, n, m))
            break
        spread = m ** 0.6
        x, total = _poissonize(gen, ctr, n, m - spread)
        if total < m - 2.0 * spread:
            ctr[CASE_A] += 1
            if top:
                ctr[CASE_A_TOP] += 1
            x = _add_balls(gen, ctr, x, n, m - total)
            acc = _combine_sum(gen, ctr, acc, x)
            break
        if total > m:
            ctr[CASE_B] += 1
            if top:
                ctr[CASE_B_TOP] += 1
            x = _remove_balls(gen, ctr, x, total, total - m)
            acc = _combine_sum(gen, ctr, acc, x)
            break
        ctr[CASE_C] += 1
        depth += 1
        top = False
        acc = _combine_sum(gen, ctr, acc, x)
        m -= total
        if m == 0:
            break
    if depth > ctr[MAX_DEPTH]:
        ctr[MAX_DEPTH] = depth
    return acc


@njit(cache=True)
def _generate_many(gen, ctr, n, m, kstar, out):
    auto = kstar <= 0.0
    k = _auto_kstar(n, m) if auto else kstar
    for t in range(out.shape[0]):
        c = _generate(gen, ctr, n, m, k)
        out[t, :c.shape[0]] = c


@njit(cache=True)
def _combine_sum_rows(gen, ctr, xs, ys, out):
    for t in range(out.shape[0]):
        c = _combine_sum(gen, ctr, _trim(xs[t], xs.shape[1]), _trim(ys[t], ys.shape[1]))
        out[t, :c.shape[0]] = c


@njit(cache=True)
def _naive_many(gen, ctr, n, m, out):
    loads = np.zeros(n, dtype=np.int64)
    for t in range(out.shape[0]):
        loads[:] = 0
        c = _throw_into(gen, ctr, loads, m)
        out[t, :c.shape[0]] = c


# --------------------------------------------------------------------------
# public API


def _check_bins(n):
    if int(n) != n or n < 1:
        raise ParameterError(f"number of bins must be a positive integer, got {n!r}")
    if n > MAX_PARAM:
        raise ParameterError(f"n={n} exceeds the supported cap 2**53")
    return int(n)


def _check_balls(m):
    if int(m) != m or m < 0:
        raise ParameterError(f"number of balls must be a non-negative integer, got {m!r}")
    if m > MAX_PARAM:
        raise ParameterError(f"m={m} exceeds the supported cap 2**53")
    return int(m)


def _vector(n, counts) -> CardinalityVector:
    return CardinalityVector(n, int(_ball_count(counts)), tuple(counts.tolist()))


def naive_cardinalities(n: int, m: int, rng: RandomSource) -> CardinalityVector:
    """Throw ``m`` balls into an explicit array of ``n`` bins.  Theta(n + m)."""
    n = _check_bins(n)
    m = _check_balls(m)
    rng = as_source(rng)
    dtype = np.int32 if m < 2**31 else np.int64
    loads = np.zeros(n, dtype=dtype)
    counts = _throw_into(rng.generator, rng.counters, loads, m)
    return CardinalityVector(n, m, tuple(counts.tolist()))


def poissonized_cardinalities(n: int, lam: float, rng: RandomSource
                              ) -> tuple[CardinalityVector, int]:
    """Cardinalities of ``n`` independent Poisson(lam/n) bin loads.

    Returns the vector and its ball count ``N``, which is Poisson(lam).
    """
    n = _check_bins(n)
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ParameterError(f"lambda must be finite and non-negative, got {lam}")
    rng = as_source(rng)
    counts, total = _poissonize(rng.generator, rng.counters, n, lam)
    return CardinalityVector(n, int(total), tuple(counts.tolist())), int(total)


def default_kstar(n: int, m: int) -> float:
    """``10 ln n / ln((4n/m) ln n)``, the smallest admissible work parameter.

    Defined for ``n >= 3`` and ``n <= m <= n ln n``.
    """
    n = _check_bins(n)
    m = _check_balls(m)
    if n < 3:
        raise ParameterError(f"default kstar needs n >= 3, got n={n}")
    ln = math.log(n)
    if not n <= m <= n * ln:
        raise ParameterError(f"default kstar needs n <= m <= n ln n, got n={n}, m={m}")
    inner = 4.0 * n / m * ln
    if inner <= 1.0:
        raise ParameterError(f"(4n/m) ln n = {inner} makes the denominator non-positive")
    return 10.0 * ln / math.log(inner)


def auto_kstar(n: int, m: int) -> float:
    """Work parameter used when none is given.

    The ``default_kstar`` formula wherever its logarithms are positive,
    clamped to ``[1, 8 (ln n)**5]``; the upper end elsewhere.  Any value
    ``>= 1`` yields the exact distribution, so this only tunes speed.
    """
    return float(_auto_kstar(_check_bins(n), _check_balls(m)))


def _resolve_kstar(n, m, kstar):
    if kstar is None:
        return float(_auto_kstar(n, m))
    kstar = float(kstar)
    if not kstar >= 1.0:
        raise ParameterError(f"kstar must be >= 1, got {kstar}")
    return kstar


def generate_bin_cardinalities(n: int, m: int, rng: RandomSource,
                               kstar: float | None = None) -> CardinalityVector:
    """Exact Multinomial(m; 1/n, ..., 1/n) bin cardinalities in polylog time.

    ``kstar`` bounds the base case; ``None`` picks :func:`auto_kstar`.
    """
    n = _check_bins(n)
    m = _check_balls(m)
    kstar = _resolve_kstar(n, m, kstar)
    rng = as_source(rng)
    return _vector(n, _generate(rng.generator, rng.counters, n, m, kstar))


def generate_many(n: int, m: int, trials: int, rng: RandomSource,
                  kstar: float | None = None) -> np.ndarray:
    """``trials`` independent generator outputs as rows, zero-padded to width ``m + 1``."""
    n = _check_bins(n)
    m = _check_balls(m)
    kstar = _resolve_kstar(n, m, kstar)
    rng = as_source(rng)
    out = np.zeros((int(trials), m + 1), dtype=np.int64)
    _generate_many(rng.generator, rng.counters, n, m, kstar, out)
    return out


def naive_many(n: int, m: int, trials: int, rng: RandomSource) -> np.ndarray:
    """Like :func:`generate_many` but from the explicit-array oracle."""
    n = _check_bins(n)
    m = _check_balls(m)
    rng = as_source(rng)
    out = np.zeros((int(trials), m + 1), dtype=np.int64)
    _naive_many(rng.generator, rng.counters, n, m, out)
    return out


def combine_and_sum_many(xs: np.ndarray, ys: np.ndarray, rng: RandomSource) -> np.ndarray:
    """Row-wise :func:`combine_and_sum` of two stacks of zero-padded vectors."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    if xs.shape[0] != ys.shape[0]:
        raise ParameterError("both stacks need the same number of rows")
    if not np.array_equal(xs.sum(axis=1), ys.sum(axis=1)):
        raise ParameterError("paired rows must cover the same number of bins")
    rng = as_source(rng)
    out = np.zeros((xs.shape[0], xs.shape[1] + ys.shape[1] - 1), dtype=np.int64)
    _combine_sum_rows(rng.generator, rng.counters, xs, ys, out)
    return out


def add_one_ball(x: CardinalityVector, rng: RandomSource) -> CardinalityVector:
    """Throw one more ball: a bin of load ``i`` is hit with probability ``X_i / n``."""
    rng = as_source(rng)
    counts = _add_balls(rng.generator, rng.counters, x.to_array(), x.n, 1)
    return CardinalityVector(x.n, x.m + 1, tuple(counts.tolist()))


def remove_one_ball(x: CardinalityVector, rng: RandomSource) -> CardinalityVector:
    """Delete a uniformly random ball: load class ``i`` w.p. ``i X_i / m``."""
    if x.m == 0:
        raise EmptyStateError("cannot remove a ball from an empty allocation")
    rng = as_source(rng)
    counts = _remove_balls(rng.generator, rng.counters, x.to_array(), x.m, 1)
    return CardinalityVector(x.n, x.m - 1, tuple(counts.tolist()))


def combine_cardinalities(x: CardinalityVector, y: CardinalityVector,
                          rng: RandomSource) -> JointCardinalityMatrix:
    """Joint per-bin sample counts of two independent allocations.

    Row ``r`` is a multivariate hypergeometric draw of ``X_r`` bins from the
    ``Y`` classes not yet assigned to an earlier row.
    """
    if x.n != y.n:
        raise ParameterError(f"bin counts differ: {x.n} != {y.n}")
    rng = as_source(rng)
    z = _combine(rng.generator, rng.counters, x.to_array(), y.to_array())
    joint = JointCardinalityMatrix(x.n, z)
    if (not np.array_equal(joint.row_marginals(), x.to_array())
            or not np.array_equal(joint.col_marginals(), y.to_array())):
        raise InvariantError("joint matrix marginals do not match its inputs")
    return joint


def combine_and_sum(x: CardinalityVector, y: CardinalityVector,
                    rng: RandomSource) -> CardinalityVector:
    """Cardinalities of the union of two independent allocations over the same bins."""
    if x.n != y.n:
        raise ParameterError(f"bin counts differ: {x.n} != {y.n}")
    rng = as_source(rng)
    counts = _combine_sum(rng.generator, rng.counters, x.to_array(), y.to_array())
    return CardinalityVector(x.n, x.m + y.m, tuple(counts.tolist()))
