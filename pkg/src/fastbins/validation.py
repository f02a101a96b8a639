"""Seeded validation suites shared by the CLI and the acceptance tests.

Every suite returns a list of check records (plain dicts) with at least
``suite``, ``check``, ``params`` and ``passed``; statistical checks also
carry ``statistic``, ``dof`` and ``p_value``.  Distributional checks use
chi-square at significance 1e-3.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from . import variates
from .cardinalities import (
    combine_and_sum_many, generate_bin_cardinalities, generate_many,
)
from .rng import MAX_BLOCK_SPECIALS, RandomSource
from .stats import (
    SIGNIFICANCE, ExactDistribution, OutcomeHistogram, chi_square_test,
    exact_cardinality_distribution, exact_twosample_distribution,
)
from .twosample import (
    block_size, one_choice, simulate_many, simulate_twosample_fast, threshold,
    two_choice,
)

__all__ = ["SUITES", "run_suite"]

TRIALS = 10**6


def _record(suite, check, params, result=None, passed=None, **extra):
    rec = {"suite": suite, "check": check, "params": params}
    if result is not None:
        rec.update(statistic=result.statistic, dof=result.dof, p_value=result.p_value)
        passed = result.passed(SIGNIFICANCE) if passed is None else passed
    rec["passed"] = bool(passed)
    rec.update(extra)
    return rec


def _chi(rows, expected):
    return chi_square_test(OutcomeHistogram.from_rows(rows), expected)


# --------------------------------------------------------------------------
# structural invariants


def invariants(seed: int = 1, calls: int = 10**4) -> list:
    """Random ``(n, m)`` with ``n <= 10**6``, ``n <= m <= n ln n``."""
    rng = RandomSource(seed)
    params = np.random.default_rng(seed)
    bad = []
    for _ in range(calls):
        n = int(params.integers(1, 10**6 + 1))
        hi = max(n, int(n * math.log(n)))
        m = int(params.integers(n, hi + 1))
        x = generate_bin_cardinalities(n, m, rng)
        c = x.counts
        if sum(c) != n or sum(j * v for j, v in enumerate(c)) != m or c[-1] == 0:
            bad.append((n, m))
    return [_record("invariants", "sum/balls/trimmed", {"calls": calls},
                    passed=not bad, failures=bad[:10])]


# --------------------------------------------------------------------------
# distributional equivalence


def equivalence_cardinalities(seed: int = 1, trials: int = TRIALS) -> list:
    """Fast generator vs exhaustive enumeration, and the combine step."""
    out = []
    for i, (n, m, kstar) in enumerate(itertools.product(range(1, 5), range(7), (None, 1))):
        rng = RandomSource(seed + i)
        rows = generate_many(n, m, trials, rng, kstar=kstar)
        res = _chi(rows, exact_cardinality_distribution(n, m))
        out.append(_record("equivalence-cardinalities", "generate",
                           {"n": n, "m": m, "kstar": kstar or "auto"}, res))
    rng = RandomSource(seed + 1000)
    xs = generate_many(3, 2, trials, rng)
    ys = generate_many(3, 1, trials, rng)
    rows = combine_and_sum_many(xs, ys, rng)
    out.append(_record("equivalence-cardinalities", "combine_and_sum",
                       {"n": 3, "m": [2, 1]}, _chi(rows, exact_cardinality_distribution(3, 3))))
    return out


def twosample_rules():
    return [one_choice(), two_choice(), threshold(1)]


def equivalence_twosample(seed: int = 1, trials: int = TRIALS) -> list:
    """Block simulator vs the exact law of the step-by-step process."""
    out = []
    cells = itertools.product((2, 3, 4), range(1, 7), twosample_rules())
    for i, (n, m, q) in enumerate(cells):
        rng = RandomSource(seed + i)
        rows = simulate_many(n, m, q, trials, rng)
        res = _chi(rows, exact_twosample_distribution(n, m, q))
        out.append(_record("equivalence-twosample", "simulate",
                           {"n": n, "m": m, "process": q.name}, res))
    return out


def collision_bound(seed: int = 1, runs: int = 100, n: int = 10**6) -> list:
    """Largest number of special pairs in any block, against ``9 ln n``."""
    worst = 0
    for i in range(runs):
        rng = RandomSource(seed + i)
        simulate_twosample_fast(n, n, two_choice(), rng)
        worst = max(worst, int(rng.counters[MAX_BLOCK_SPECIALS]))
    bound = 9 * math.log(n)
    return [_record("collision-bound", "max specials per block",
                    {"n": n, "m": n, "runs": runs, "block": block_size(n)},
                    passed=worst <= bound, observed=worst, bound=bound)]


# --------------------------------------------------------------------------
# variates at small scale

MV_CLASSES = [(2, 2), (5, 3), (4, 4), (1, 7), (3, 3, 2), (2, 0, 3, 1), (1, 2, 3, 2),
              (1, 1, 1, 1, 1, 1, 1, 1)]
PROB_SETS = [
    (Fraction(1, 2), Fraction(1, 2)),
    (Fraction(1, 5), Fraction(3, 10), Fraction(1, 2)),
    (Fraction(1, 3),) * 3,
    (Fraction(1, 4), Fraction(0), Fraction(3, 4)),
    (Fraction(1, 10),) * 10,
]


def _hyper_pmf(N, d, b):
    total = math.comb(N, d)
    return {k: Fraction(math.comb(b, k) * math.comb(N - b, d - k), total)
            for k in range(max(0, d + b - N), min(d, b) + 1)}


def _key(vec):
    # multinomial outputs are padded with zeros, keys ignore them
    return ",".join(f"{j}:{c}" for j, c in enumerate(vec) if c)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial_pmf(n, probs):
    out = {}
    for x in _compositions(n, len(probs)):
        coef = math.factorial(n)
        p = Fraction(1)
        for xi, pi in zip(x, probs):
            coef //= math.factorial(xi)
            p *= pi**xi
        if p:
            out[_key(x)] = out.get(_key(x), 0) + coef * p
    return out


def _mvhyper_pmf(classes, draws):
    total = math.comb(sum(classes), draws)
    out = {}
    for x in _compositions(draws, len(classes)):
        w = math.prod(math.comb(c, xi) for c, xi in zip(classes, x))
        if w:
            out[_key(x)] = Fraction(w, total)
    return out


def _vector_hist(rows):
    return OutcomeHistogram.from_rows(rows)


def variates_exactness(seed: int = 1, trials: int = TRIALS) -> list:
    """Every non-degenerate small case of the hypergeometric family and the
    lazy multinomial, against exact enumeration."""
    out = []
    i = 0
    for N in range(9):
        for d in range(N + 1):
            for b in range(N + 1):
                pmf = _hyper_pmf(N, d, b)
                if len(pmf) < 2:
                    continue
                i += 1
                draws = variates.hypergeometric(N, d, b, RandomSource(seed + i), size=trials)
                hist = OutcomeHistogram(dict(zip(*np.unique(draws, return_counts=True))))
                exact = ExactDistribution(pmf)
                out.append(_record("variates-exactness", "hypergeometric",
                                   {"population": N, "draws": d, "marked": b},
                                   chi_square_test(hist, exact)))
    for classes in MV_CLASSES:
        for d in range(1, sum(classes)):
            i += 1
            rows = variates.multivariate_hypergeometric_lazy(
                classes, d, RandomSource(seed + i), size=trials)
            out.append(_record("variates-exactness", "multivariate_hypergeometric",
                               {"classes": list(classes), "draws": d},
                               chi_square_test(_vector_hist(rows),
                                               ExactDistribution(_mvhyper_pmf(classes, d)))))
    for probs in PROB_SETS:
        for n in range(1, 9):
            i += 1
            rows = variates.multinomial_lazy(n, [float(p) for p in probs],
                                             RandomSource(seed + i), size=trials)
            out.append(_record("variates-exactness", "multinomial_lazy",
                               {"n": n, "probs": [str(p) for p in probs]},
                               chi_square_test(_vector_hist(rows),
                                               ExactDistribution(_multinomial_pmf(n, probs)))))
    return out


SUITES = {
    "invariants": invariants,
    "equivalence-cardinalities": equivalence_cardinalities,
    "equivalence-twosample": equivalence_twosample,
    "collision-bound": collision_bound,
    "variates-exactness": variates_exactness,
}


def run_suite(name: str, seed: int = 1, trials: int | None = None) -> list:
    """Run a suite by name; ``trials`` overrides its per-cell sample count."""
    suite = SUITES[name]
    if trials is None or name in ("invariants", "collision-bound"):
        return suite(seed)
    return suite(seed, trials)
