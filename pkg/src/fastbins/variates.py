"""Exact discrete variate generators.

Binomial, Poisson and hypergeometric variates share one rejection sampler for
discrete log-concave laws: a flat top of height ``p(mode)`` flanked by
exponential tails (Devroye's 1987 generator).  Expected iterations are at most
``4 + p(mode)`` whatever the parameters, so the cost per variate does not grow
with ``n`` or ``lambda``.  Small-mean binomial and Poisson variates use
sequential-search inversion instead.

Log-probabilities are evaluated in the saddle-point form of Loader (2000):

    log p = base - sum(+/- stirlerr(j))

where ``stirlerr(j) = ln j! - [(j + 1/2) ln j - j + ln sqrt(2 pi)]``.  The
Robbins bounds ``1/(12j+1) < stirlerr(j) < 1/(12j)`` bracket ``log p``
cheaply; the exact correction is computed only when the bracket straddles the
acceptance threshold.

The compiled kernels (leading underscore) take ``(gen, ctr)``: a NumPy
``Generator`` and the counter array of a :class:`~fastbins.rng.RandomSource`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .rng import DRAWS, RandomSource, as_source

__all__ = [
    "ClassCounts",
    "MAX_PARAM",
    "binomial",
    "hypergeometric",
    "log_factorial_bounds",
    "multinomial_lazy",
    "multivariate_hypergeometric_lazy",
    "poisson",
]

# Integer and real parameters are capped where float64 stops being exact.
MAX_PARAM = 2**53
PROB_TOLERANCE = 1e-9

LN_2PI = math.log(2.0 * math.pi)
LN_SQRT_2PI = 0.5 * LN_2PI

# stirlerr(j) for j <= 15, to full double precision.
_STIRLERR = np.array([
    0.0,
    0.08106146679532726,
    0.0413406959554093,
    0.02767792568499834,
    0.020790672103765093,
    0.016644691189821193,
    0.013876128823070748,
    0.01189670994589177,
    0.010411265261972096,
    0.009255462182712733,
    0.00833056343336287,
    0.007573675487951841,
    0.00694284010720953,
    0.006408994188004207,
    0.0059513701127588475,
    0.005554733551962801,
])

_S0 = 1.0 / 12.0
_S1 = 1.0 / 360.0
_S2 = 1.0 / 1260.0
_S3 = 1.0 / 1680.0
_S4 = 1.0 / 1188.0

INF = np.inf


# --------------------------------------------------------------------------
# uniform sources


@njit(cache=True)
def _uniform(gen, ctr):
    ctr[DRAWS] += 1
    return gen.random()


@njit(cache=True)
def _randint(gen, ctr, n):
    """Uniform integer on {0, ..., n-1}."""
    ctr[DRAWS] += 1
    return gen.integers(0, n)


# --------------------------------------------------------------------------
# log-pmf machinery


@njit(cache=True)
def _stirlerr(j):
    if j <= 15:
        return _STIRLERR[j]
    x = float(j)
    xx = x * x
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / xx) / xx) / xx) / xx) / x


@njit(cache=True)
def _stirlerr_lo(j):
    return 1.0 / (12.0 * j + 1.0)


@njit(cache=True)
def _stirlerr_hi(j):
    return 1.0 / (12.0 * j)


@njit(cache=True)
def _bd0(x, mu):
    """Deviance term ``x ln(x/mu) + mu - x`` without cancellation."""
    if x == 0.0:
        return mu
    if abs(x - mu) < 0.1 * (x + mu):
        v = (x - mu) / (x + mu)
        s = (x - mu) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
        return s
    return x * math.log(x / mu) + mu - x


@njit(cache=True)
def _dbinom_base(k, n, p, q):
    # log pmf of Binomial(n, p) at k, minus the stirlerr terms that exist
    # when 0 < k < n.  Requires n >= 1 and 0 <= k <= n.
    if k == 0:
        if p < 0.1:
            return -_bd0(float(n), n * q) - n * p
        return n * math.log(q)
    if k == n:
        if q < 0.1:
            return -_bd0(float(n), n * p) - n * q
        return n * math.log(p)
    return (-_bd0(float(k), n * p) - _bd0(float(n - k), n * q)
            - 0.5 * (LN_2PI + math.log(k) + math.log1p(-k / n)))


@njit(cache=True)
def _dbinom_log(k, n, p, q):
    if k < 0 or k > n:
        return -INF
    if n == 0:
        return 0.0
    b = _dbinom_base(k, n, p, q)
    if 0 < k < n:
        b += _stirlerr(n) - _stirlerr(k) - _stirlerr(n - k)
    return b


@njit(cache=True)
def _dbinom_log_bounds(k, n, p, q):
    if k < 0 or k > n:
        return -INF, -INF
    if n == 0:
        return 0.0, 0.0
    b = _dbinom_base(k, n, p, q)
    if 0 < k < n:
        lo = b + _stirlerr_lo(n) - _stirlerr_hi(k) - _stirlerr_hi(n - k)
        hi = b + _stirlerr_hi(n) - _stirlerr_lo(k) - _stirlerr_lo(n - k)
        return lo, hi
    return b, b


@njit(cache=True)
def _dpois_base(k, lam):
    if k == 0:
        return -lam
    return -_bd0(float(k), lam) - 0.5 * (LN_2PI + math.log(k))


@njit(cache=True)
def _dpois_log(k, lam):
    if k < 0:
        return -INF
    if k == 0:
        return -lam
    return _dpois_base(k, lam) - _stirlerr(k)


@njit(cache=True)
def _dpois_log_bounds(k, lam):
    if k < 0:
        return -INF, -INF
    b = _dpois_base(k, lam)
    if k == 0:
        return b, b
    return b - _stirlerr_hi(k), b - _stirlerr_lo(k)


# Hypergeometric(population N, draws d, marked b) at k, written as
#   dbinom(k; b, r) * dbinom(d - k; N - b, r) / dbinom(d; N, r),  r = d/N.


@njit(cache=True)
def _dhyper_log(k, N, d, b):
    if k < 0 or k > b or d - k < 0 or d - k > N - b:
        return -INF
    r = d / N
    s = (N - d) / N
    return (_dbinom_log(k, b, r, s) + _dbinom_log(d - k, N - b, r, s)
            - _dbinom_log(d, N, r, s))


@njit(cache=True)
def _dhyper_log_bounds(k, N, d, b):
    if k < 0 or k > b or d - k < 0 or d - k > N - b:
        return -INF, -INF
    r = d / N
    s = (N - d) / N
    lo1, hi1 = _dbinom_log_bounds(k, b, r, s)
    lo2, hi2 = _dbinom_log_bounds(d - k, N - b, r, s)
    lo3, hi3 = _dbinom_log_bounds(d, N, r, s)
    return lo1 + lo2 - hi3, hi1 + hi2 - lo3


# --------------------------------------------------------------------------
# log-concave rejection


@njit(cache=True)
def _lc_propose(gen, ctr, pm, lpm):
    """Draw an offset from the mode and the log envelope height there."""
    w = 1.0 + 0.5 * pm
    if _uniform(gen, ctr) * (1.0 + w) <= w:
        x = _uniform(gen, ctr) * w / pm
        lenv = lpm
    else:
        e = -math.log1p(-_uniform(gen, ctr))
        x = (w + e) / pm
        lenv = lpm - e
    if _uniform(gen, ctr) < 0.5:
        x = -x
    return np.int64(math.floor(x + 0.5)), lenv


@njit(cache=True)
def _log_v(gen, ctr):
    # log of a Uniform(0, 1] variate
    return math.log1p(-_uniform(gen, ctr))


@njit(cache=True)
def _binomial_reject(gen, ctr, n, p, q):
    mode = np.int64(math.floor((n + 1) * p))
    if mode > n:
        mode = n
    lpm = _dbinom_log(mode, n, p, q)
    while mode < n and _dbinom_log(mode + 1, n, p, q) > lpm:
        mode += 1
        lpm = _dbinom_log(mode, n, p, q)
    while mode > 0 and _dbinom_log(mode - 1, n, p, q) > lpm:
        mode -= 1
        lpm = _dbinom_log(mode, n, p, q)
    pm = math.exp(lpm)
    while True:
        k, lenv = _lc_propose(gen, ctr, pm, lpm)
        x = mode + k
        if x < 0 or x > n:
            continue
        t = lenv + _log_v(gen, ctr)
        lo, hi = _dbinom_log_bounds(x, n, p, q)
        if t <= lo:
            return x
        if t > hi:
            continue
        if t <= _dbinom_log(x, n, p, q):
            return x


@njit(cache=True)
def _binomial_pq(gen, ctr, n, p, q):
    """Binomial(n, p) given both ``p`` and ``q = 1 - p`` to full precision."""
    if n <= 0 or p <= 0.0:
        return np.int64(0)
    if q <= 0.0:
        return np.int64(n)
    flip = False
    if p > q:
        p, q = q, p
        flip = True
    if n == 1:
        x = np.int64(1) if _uniform(gen, ctr) < p else np.int64(0)
    elif n * p < 10.0:
        # sequential-search inversion from zero
        r = p / q
        f0 = math.exp(n * math.log1p(-p))
        while True:
            u = _uniform(gen, ctr)
            x = np.int64(0)
            f = f0
            while u > f:
                u -= f
                x += 1
                if x > n or f == 0.0:
                    break
                f *= r * (n - x + 1) / x
            if x <= n and u <= f:
                break
    else:
        x = _binomial_reject(gen, ctr, n, p, q)
    return n - x if flip else x


@njit(cache=True)
def _binomial(gen, ctr, n, p):
    return _binomial_pq(gen, ctr, n, p, 1.0 - p)


@njit(cache=True)
def _poisson(gen, ctr, lam):
    if lam <= 0.0:
        return np.int64(0)
    if lam < 10.0:
        f0 = math.exp(-lam)
        while True:
            u = _uniform(gen, ctr)
            x = np.int64(0)
            f = f0
            while u > f:
                u -= f
                x += 1
                f *= lam / x
                if f == 0.0:
                    break
            if u <= f:
                return x
    mode = np.int64(math.floor(lam))
    lpm = _dpois_log(mode, lam)
    while _dpois_log(mode + 1, lam) > lpm:
        mode += 1
        lpm = _dpois_log(mode, lam)
    while mode > 0 and _dpois_log(mode - 1, lam) > lpm:
        mode -= 1
        lpm = _dpois_log(mode, lam)
    pm = math.exp(lpm)
    while True:
        k, lenv = _lc_propose(gen, ctr, pm, lpm)
        x = mode + k
        if x < 0:
            continue
        t = lenv + _log_v(gen, ctr)
        lo, hi = _dpois_log_bounds(x, lam)
        if t <= lo:
            return x
        if t > hi:
            continue
        if t <= _dpois_log(x, lam):
            return x


@njit(cache=True)
def _hypergeometric(gen, ctr, N, d, b):
    """Marked items among ``d`` drawn without replacement from ``N`` (``b`` marked)."""
    lo = max(0, d + b - N)
    hi = min(d, b)
    if lo >= hi:
        return np.int64(lo)
    if d == 1:
        return np.int64(1) if _randint(gen, ctr, N) < b else np.int64(0)
    if b == 1:
        return np.int64(1) if _randint(gen, ctr, N) < d else np.int64(0)
    if d < 3037000499 and b < 3037000499:
        mode = np.int64((d + 1) * (b + 1) // (N + 2))
    else:
        mode = np.int64(math.floor((d + 1.0) * (b + 1.0) / (N + 2.0)))
    mode = min(max(mode, lo), hi)
    lpm = _dhyper_log(mode, N, d, b)
    while mode < hi and _dhyper_log(mode + 1, N, d, b) > lpm:
        mode += 1
        lpm = _dhyper_log(mode, N, d, b)
    while mode > lo and _dhyper_log(mode - 1, N, d, b) > lpm:
        mode -= 1
        lpm = _dhyper_log(mode, N, d, b)
    pm = math.exp(lpm)
    while True:
        k, lenv = _lc_propose(gen, ctr, pm, lpm)
        x = mode + k
        if x < lo or x > hi:
            continue
        t = lenv + _log_v(gen, ctr)
        l_lo, l_hi = _dhyper_log_bounds(x, N, d, b)
        if t <= l_lo:
            return x
        if t > l_hi:
            continue
        if t <= _dhyper_log(x, N, d, b):
            return x


# --------------------------------------------------------------------------
# sequential multivariate generators


@njit(cache=True)
def _mvhyper(gen, ctr, classes, draws, out):
    """Fill ``out`` with a multivariate hypergeometric draw; return its length.

    The length is the stopping index: entries past it are left at zero.
    """
    remaining = np.int64(0)
    for j in range(classes.shape[0]):
        remaining += classes[j]
    length = 0
    for j in range(classes.shape[0]):
        out[j] = 0
    j = 0
    while draws > 0:
        c = classes[j]
        x = _hypergeometric(gen, ctr, remaining, draws, c)
        out[j] = x
        draws -= x
        remaining -= c
        j += 1
        length = j
    return length


@njit(cache=True)
def _multinomial_weights(gen, ctr, trials, weights, out):
    """Split ``trials`` over integer ``weights``; exact lazy multinomial.

    Class ``j`` gets ``Binomial(rest, w_j / W_rest)`` where ``W_rest`` is the
    weight not yet visited.  Returns the stopping index.
    """
    total = np.int64(0)
    for j in range(weights.shape[0]):
        total += weights[j]
        out[j] = 0
    length = 0
    j = 0
    while trials > 0:
        w = weights[j]
        if w > 0:
            x = _binomial_pq(gen, ctr, trials, w / total, (total - w) / total)
            out[j] = x
            trials -= x
            total -= w
        j += 1
        length = j
    return length


@njit(cache=True)
def _binomial_many(gen, ctr, ns, p, q, out):
    for i in range(ns.shape[0]):
        out[i] = _binomial_pq(gen, ctr, ns[i], p, q)


@njit(cache=True)
def _binomial_fill(gen, ctr, n, p, out):
    for i in range(out.shape[0]):
        out[i] = _binomial(gen, ctr, n, p)


@njit(cache=True)
def _poisson_fill(gen, ctr, lam, out):
    for i in range(out.shape[0]):
        out[i] = _poisson(gen, ctr, lam)


@njit(cache=True)
def _hypergeometric_fill(gen, ctr, N, d, b, out):
    for i in range(out.shape[0]):
        out[i] = _hypergeometric(gen, ctr, N, d, b)


@njit(cache=True)
def _mvhyper_fill(gen, ctr, classes, draws, out):
    longest = 0
    for i in range(out.shape[0]):
        length = _mvhyper(gen, ctr, classes, draws, out[i])
        longest = max(longest, length)
    return longest


# --------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class ClassCounts:
    """Urn contents: ``counts[j]`` balls of colour ``j``."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ParameterError(f"class counts must be non-negative: {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __len__(self):
        return len(self.counts)


def _check_int(name, value, cap=MAX_PARAM):
    if int(value) != value:
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 0:
        raise ParameterError(f"{name} must be non-negative, got {value}")
    if value > cap:
        raise ParameterError(f"{name}={value} exceeds the supported cap 2**53")
    return value


def _check_size(size):
    if size is None:
        return None
    size = int(size)
    if size < 0:
        raise ParameterError(f"size must be non-negative, got {size}")
    return size


def binomial(n: int, p: float, rng: RandomSource, size: int | None = None):
    """Binomial(n, p) variate, or an array of ``size`` of them."""
    n = _check_int("n", n)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    rng = as_source(rng)
    size = _check_size(size)
    if size is None:
        return int(_binomial(rng.generator, rng.counters, n, p))
    out = np.empty(size, dtype=np.int64)
    _binomial_fill(rng.generator, rng.counters, n, p, out)
    return out


def poisson(lam: float, rng: RandomSource, size: int | None = None):
    """Poisson(lam) variate, or an array of ``size`` of them."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ParameterError(f"lambda must be finite and non-negative, got {lam}")
    if lam > MAX_PARAM:
        raise ParameterError(f"lambda={lam} exceeds the supported cap 2**53")
    rng = as_source(rng)
    size = _check_size(size)
    if size is None:
        return int(_poisson(rng.generator, rng.counters, lam))
    out = np.empty(size, dtype=np.int64)
    _poisson_fill(rng.generator, rng.counters, lam, out)
    return out


def hypergeometric(population: int, draws: int, marked: int, rng: RandomSource,
                   size: int | None = None):
    """Number of marked items among ``draws`` taken without replacement.

    The result lies in ``[max(0, draws + marked - population), min(draws, marked)]``.
    """
    population = _check_int("population", population)
    draws = _check_int("draws", draws)
    marked = _check_int("marked", marked)
    if draws > population:
        raise ParameterError(f"draws={draws} exceeds population={population}")
    if marked > population:
        raise ParameterError(f"marked={marked} exceeds population={population}")
    rng = as_source(rng)
    size = _check_size(size)
    if size is None:
        return int(_hypergeometric(rng.generator, rng.counters, population, draws, marked))
    out = np.empty(size, dtype=np.int64)
    _hypergeometric_fill(rng.generator, rng.counters, population, draws, marked, out)
    return out


class _Lookahead:
    """Iterator wrapper that can tell whether the current item is the last."""

    _END = object()

    def __init__(self, iterable):
        self._it = iter(iterable)
        self._next = next(self._it, self._END)

    def pop(self):
        if self._next is self._END:
            raise StopIteration
        item = self._next
        self._next = next(self._it, self._END)
        return item, self._next is self._END


def _conditional_probs(probs: Iterable[float]):
    """Yield ``(p_j / (1 - s_j), (1 - s_j - p_j) / (1 - s_j))`` per class."""
    stream = _Lookahead(probs)
    s = 0.0
    comp = 0.0  # Neumaier compensation for s
    while True:
        try:
            p, last = stream.pop()
        except StopIteration:
            raise ParameterError("empty probability sequence") from None
        p = float(p)
        if not math.isfinite(p) or p < 0:
            raise ParameterError(f"probabilities must be finite and non-negative, got {p}")
        rest = 1.0 - (s + comp)
        if s + comp + p > 1.0 + PROB_TOLERANCE:
            raise ParameterError(f"cumulative probability {s + comp + p!r} exceeds 1")
        if last:
            if s + comp + p < 1.0 - PROB_TOLERANCE:
                raise ParameterError(f"probabilities sum to {s + comp + p!r} < 1")
            yield 1.0, 0.0
            return
        if p >= rest:
            yield 1.0, 0.0
            return
        yield p / rest, (rest - p) / rest
        t = s + p
        if abs(s) >= p:
            comp += (s - t) + p
        else:
            comp += (p - t) + s
        s = t


def multinomial_lazy(n: int, probs: Iterable[float], rng: RandomSource,
                     size: int | None = None):
    """Sequential Multinomial(n; p_1, p_2, ...) truncated at its stopping index.

    ``probs`` may be any iterable, including an infinite generator; it is
    consumed only as far as needed.  ``X_j`` is drawn as
    ``Binomial(n - X_1 - ... - X_{j-1}, p_j / (1 - p_1 - ... - p_{j-1}))`` and
    generation stops at the first ``j`` where the running total reaches ``n``,
    so the returned list has no trailing zeros.

    With ``size`` the draws are vectorised over trials and a 2-D array is
    returned, zero-padded to the longest trial.
    """
    n = _check_int("n", n)
    rng = as_source(rng)
    size = _check_size(size)
    gen, ctr = rng.generator, rng.counters
    if size is None:
        out = []
        rest = n
        if rest == 0:
            return out
        for cond, comp in _conditional_probs(probs):
            x = int(_binomial_pq(gen, ctr, rest, cond, comp))
            out.append(x)
            rest -= x
            if rest == 0:
                break
        return out

    rest = np.full(size, n, dtype=np.int64)
    columns = []
    if n > 0 and size > 0:
        x = np.empty(size, dtype=np.int64)
        for cond, comp in _conditional_probs(probs):
            _binomial_many(gen, ctr, rest, cond, comp, x)
            columns.append(x.copy())
            rest -= x
            if not rest.any():
                break
    if not columns:
        return np.zeros((size, 0), dtype=np.int64)
    return np.column_stack(columns)


def multivariate_hypergeometric_lazy(classes: ClassCounts | Sequence[int], draws: int,
                                     rng: RandomSource, size: int | None = None):
    """Colour counts of ``draws`` balls taken without replacement.

    Returns ``[X_1, ..., X_l]`` with ``l`` the first index at which the
    counts reach ``draws``.  With ``size``, a 2-D array zero-padded to the
    longest trial.
    """
    if not isinstance(classes, ClassCounts):
        classes = ClassCounts(tuple(classes))
    for c in classes.counts:
        _check_int("class count", c)
    draws = _check_int("draws", draws)
    if draws > classes.total:
        raise ParameterError(f"draws={draws} exceeds total={classes.total}")
    rng = as_source(rng)
    size = _check_size(size)
    arr = np.asarray(classes.counts, dtype=np.int64)
    if size is None:
        out = np.zeros(arr.shape[0], dtype=np.int64)
        length = _mvhyper(rng.generator, rng.counters, arr, draws, out)
        return [int(v) for v in out[:length]]
    out = np.zeros((size, arr.shape[0]), dtype=np.int64)
    longest = _mvhyper_fill(rng.generator, rng.counters, arr, draws, out)
    return out[:, :longest]


def log_factorial_bounds(n: int) -> tuple[float, float]:
    """Bracket ``ln(n!)`` with first-order Stirling bounds.

    The width is ``1/(12n) - 1/(12n+1)``.  For ``n`` in {0, 1} both bounds
    are exactly zero.
    """
    n = _check_int("n", n)
    if n <= 1:
        return 0.0, 0.0
    base = (n + 0.5) * math.log(n) - n + LN_SQRT_2PI
    return base + 1.0 / (12 * n + 1), base + 1.0 / (12 * n)
