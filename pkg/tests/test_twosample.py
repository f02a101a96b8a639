import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ALPHA, chi_rows, freq_within
from fastbins.cardinalities import generate_many
from fastbins.errors import InvariantError, ParameterError
from fastbins.rng import BLOCKS, DRAWS, MAX_BLOCK_SPECIALS, SPECIAL_ALLOCS, RandomSource
from fastbins.stats import (
    ExactDistribution, OutcomeHistogram, chi_square_test, exact_count_thinning_distribution,
    exact_twosample_distribution,
)
from fastbins.twosample import (
    BlockPlan, LoadState, apply_batches, block_size, generate_block_counts, inner_kstar,
    naive_count_thinning, naive_twosample, one_choice, pair_samples, simulate_count_thinning,
    simulate_many, simulate_specials, simulate_twosample_fast, tabulated, threshold, two_choice,
)

NO_PAIRS = np.zeros((0, 2), dtype=np.int64)
NO_LOADS = np.zeros(0, dtype=np.int64)
NO_BATCH = np.zeros((0, 3), dtype=np.int64)


def max_loads(rows):
    return np.array([np.flatnonzero(r).max() for r in rows])


def histogram(values):
    return OutcomeHistogram(Counter(int(v) for v in values))


# ------------------------------------------------------------ load state

def test_load_state_validation():
    s = LoadState(4, 3, {0: 2, 1: 1, 2: 1, 5: 0})
    assert s.classes == {0: 2, 1: 1, 2: 1}
    assert s.max_load == 2 and s.to_counts().tolist() == [2, 1, 1]
    assert LoadState.from_counts([2, 1, 1]) == s
    assert LoadState.empty(3).classes == {0: 3}
    with pytest.raises(ParameterError):
        LoadState(4, 3, {0: 2, 1: 1})
    with pytest.raises(ParameterError):
        LoadState(3, 4, {0: 2, 1: 1})
    with pytest.raises(ParameterError):
        LoadState(3, 1, {-1: 1, 1: 2})


# ------------------------------------------------------ decision functions

def test_two_choice_examples(rng):
    q = two_choice()
    assert q(3, 5, rng) == 0
    assert q(5, 3, rng) == 1
    assert q.is_random_at(4, 4) and not q.is_random_at(3, 5)
    hits = sum(q(4, 4, rng) for _ in range(20000))
    assert freq_within(hits, 20000, 0.5)


def test_threshold_examples(rng):
    assert threshold(2)(2, 9, rng) == 0
    assert threshold(2)(3, 0, rng) == 1
    for l2 in range(10):
        assert threshold(0)(0, l2, rng) == 0
    for f in (-1, 1.5):
        with pytest.raises(ParameterError):
            threshold(f)


def test_one_choice_examples(rng):
    q = one_choice()
    assert q(7, 1, rng) == 0 and q(0, 0, rng) == 0


@given(l1=st.integers(0, 50), l2=st.integers(0, 50), f=st.integers(0, 10))
def test_deterministic_rules_repeat(l1, l2, f):
    for q in (one_choice(), threshold(f), two_choice()):
        if q.is_random_at(l1, l2):
            continue
        bits = {q(l1, l2) for _ in range(5)}
        assert len(bits) == 1


def test_tabulated_rule():
    q = tabulated("t", [[0.0, 1.0], [0.25, 0.5]])
    assert q.prob_second(0, 1) == 1.0
    assert q.prob_second(7, 9) == 0.5  # clamped to the last cell
    assert q.exact_prob_second(1, 0) == Fraction(1, 4)
    with pytest.raises(ParameterError):
        tabulated("bad", [[1.5]])


# ------------------------------------------------------------ naive

def test_naive_examples(rng):
    assert naive_twosample(3, 0, two_choice(), rng).classes == {0: 3}
    for q in (one_choice(), two_choice(), threshold(0)):
        assert naive_twosample(1, 5, q, rng).classes == {5: 1}
    for _ in range(200):
        assert naive_twosample(2, 1, two_choice(), rng).classes == {0: 1, 1: 1}


@pytest.mark.parametrize("q", [one_choice(), two_choice(), threshold(1)], ids=lambda q: q.name)
def test_naive_matches_exact(q):
    rows = simulate_many(3, 4, q, 200000, RandomSource(7), engine="naive")
    assert chi_rows(rows, exact_twosample_distribution(3, 4, q)).p_value > ALPHA


# ------------------------------------------------------------- fast

def test_fast_examples(rng):
    assert simulate_twosample_fast(4, 0, two_choice(), rng).classes == {0: 4}
    assert simulate_twosample_fast(1, 4, two_choice(), rng).classes == {4: 1}
    rows = simulate_many(4, 4, two_choice(), 10**6, RandomSource(8))
    assert chi_rows(rows, exact_twosample_distribution(4, 4, two_choice())).p_value > ALPHA


def test_block_size():
    assert [block_size(n) for n in (1, 16, 17, 10**4, 10**6)] == [1, 1, 2, 25, 250]
    assert inner_kstar(10**6) == pytest.approx(8 * math.log(10**6) ** 5)


@pytest.mark.parametrize("n,m", [(2, 7), (17, 6), (20, 9), (40, 5)])
def test_fast_crosses_blocks(n, m):
    # n >= 17 gives blocks of two pairs, so several blocks and a truncated
    # last one run
    q = two_choice()
    fast = simulate_many(n, m, q, 200000, RandomSource(n * 10 + m))
    assert chi_rows(fast, exact_twosample_distribution(n, m, q)).p_value > ALPHA


def test_randomized_rule_at_distinct_loads():
    # P(Q = 1) strictly between 0 and 1 off the diagonal exercises the
    # binomial split of batch pairs
    q = tabulated("mixed", [[0.5, 0.2, 0.7], [0.9, 0.5, 0.1], [0.3, 0.6, 0.5]])
    for n, m in ((3, 4), (9, 6)):
        rows = simulate_many(n, m, q, 300000, RandomSource(9 + n))
        if n == 3:
            expected = exact_twosample_distribution(n, m, q)
        else:
            expected = OutcomeHistogram.from_rows(
                simulate_many(n, m, q, 300000, RandomSource(19), engine="naive"))
        assert chi_rows(rows, expected).p_value > ALPHA


def test_exact_oracle_rejects_random_rule_without_ties():
    with pytest.raises(ParameterError):
        exact_twosample_distribution(2, 2, two_choice(), tie_aware=False)
    exact_twosample_distribution(2, 2, threshold(0), tie_aware=False)


def test_one_choice_matches_cardinalities():
    fast = simulate_many(64, 64, one_choice(), 10**5, RandomSource(10))
    cards = generate_many(64, 64, 10**5, RandomSource(11))
    assert chi_rows(fast, OutcomeHistogram.from_rows(cards)).p_value > ALPHA


def test_threshold_max_load_matches_naive():
    n, trials = 10**4, 10**4
    fast = simulate_many(n, n, threshold(1), trials, RandomSource(12))
    slow = simulate_many(n, n, threshold(1), trials, RandomSource(13), engine="naive")
    res = chi_square_test(histogram(max_loads(fast)), histogram(max_loads(slow)))
    assert res.p_value > ALPHA


def test_two_choice_max_load_band():
    n = 10**5
    rows = simulate_many(n, n, two_choice(), 100, RandomSource(14))
    k = max_loads(rows)
    target = math.log2(math.log(n))
    assert k.min() >= math.floor(target) - 2 and k.max() <= math.ceil(target) + 4


@given(n=st.integers(1, 2000), m=st.integers(0, 3000), seed=st.integers(0, 2**40),
       rule=st.sampled_from([one_choice(), two_choice(), threshold(0), threshold(2)]))
@settings(max_examples=150, deadline=None)
def test_fast_conserves(n, m, seed, rule):
    s = simulate_twosample_fast(n, m, rule, RandomSource(seed))
    assert s.n == n and s.balls == m
    assert sum(s.classes.values()) == n


def test_block_work_scaling():
    n = 10**6
    r = RandomSource(15)
    simulate_twosample_fast(n, n, two_choice(), r)
    m_blocks = math.ceil(n / block_size(n))
    assert r.counters[BLOCKS] == m_blocks
    assert r.counters[SPECIAL_ALLOCS] <= m_blocks * 9 * math.log(n)
    assert r.counters[MAX_BLOCK_SPECIALS] <= 9 * math.log(n)
    # draws per ball shrink as n grows along m = n; at fixed n they are
    # linear in the number of blocks, so no fixed-n bound is asserted
    small = RandomSource(16)
    simulate_twosample_fast(10**4, 10**4, two_choice(), small)
    assert r.counters[DRAWS] / n < small.counters[DRAWS] / 10**4 / 2


def test_kstar_override(rng):
    s = simulate_twosample_fast(1000, 1000, two_choice(), rng, kstar=inner_kstar(1000))
    assert s.balls == 1000
    with pytest.raises(ParameterError):
        simulate_twosample_fast(10, 10, two_choice(), rng, kstar=0.5)


# ------------------------------------------------------------ block steps

def test_block_counts_examples(rng):
    for _ in range(200):
        z = generate_block_counts(LoadState.from_counts([3, 2, 1]), 1, rng)
        firsts = sum(int((np.arange(m.shape[0])[:, None] * m).sum()) for m in z.values())
        seconds = sum(int((np.arange(m.shape[1])[None, :] * m).sum()) for m in z.values())
        assert firsts == 1 and seconds == 1
    z = generate_block_counts(LoadState.empty(50), 7, rng)
    assert list(z) == [0]
    r = RandomSource(20)
    trials = 100000
    hits = sum(generate_block_counts(LoadState.empty(2), 1, r)[0][1, 1] == 1
               for _ in range(trials))
    assert freq_within(hits, trials, 0.5)


@given(counts=st.lists(st.integers(0, 30), min_size=1, max_size=6),
       block=st.integers(1, 60), seed=st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_block_counts_marginals(counts, block, seed):
    counts[-1] = max(counts[-1], 1)
    state = LoadState.from_counts(counts)
    z = generate_block_counts(state, block, RandomSource(seed))
    firsts = seconds = 0
    for l, mat in z.items():
        assert mat.sum() == state.classes[l] and (mat >= 0).all()
        firsts += int((np.arange(mat.shape[0])[:, None] * mat).sum())
        seconds += int((np.arange(mat.shape[1])[None, :] * mat).sum())
    assert firsts == block and seconds == block
    plan = pair_samples(z, RandomSource(seed + 1))
    assert plan.block_size == block


def test_block_counts_rejects_bad_size(rng):
    with pytest.raises(ParameterError):
        generate_block_counts(LoadState.empty(3), 0, rng)


def test_pair_examples(rng):
    # every bin sampled at most once: no specials
    plan = pair_samples({0: np.array([[8, 1], [1, 0]]), 2: np.array([[0, 1], [1, 0]])}, rng)
    assert plan.specials == [] and plan.block_size == 2
    # one bin drawn as both samples of the only pair
    plan = pair_samples({0: np.array([[4, 0], [0, 1]])}, rng)
    assert plan.specials == [((0, 0), (0, 0))] and plan.batch.shape[0] == 0


def _canonical(pairs, batch):
    """Identity-free signature: specials up to id relabeling, plus batch rows."""
    ids = sorted({i for p in pairs for i, _ in p})
    best = None
    for perm in itertools.permutations(range(len(ids))):
        relabel = dict(zip(ids, perm))
        sig = tuple(sorted(((relabel[a], la), (relabel[b], lb)) for (a, la), (b, lb) in pairs))
        best = sig if best is None or sig < best else best
    return repr((best or (), tuple(sorted(batch.items()))))


def _exact_plans(loads, block):
    n = len(loads)
    out = Counter()
    for draws in itertools.product(range(n), repeat=2 * block):
        pairs = list(zip(draws[0::2], draws[1::2]))
        hits = Counter(draws)
        specials, batch = [], Counter()
        for a, b in pairs:
            if hits[a] >= 2 or hits[b] >= 2:
                specials.append(((a, loads[a]), (b, loads[b])))
            else:
                batch[loads[a], loads[b]] += 1
        out[_canonical(specials, batch)] += Fraction(1, n ** (2 * block))
    return ExactDistribution(dict(out))


def _observed_plans(state, block, trials, seed):
    r = RandomSource(seed)
    tally = Counter()
    for _ in range(trials):
        plan = pair_samples(generate_block_counts(state, block, r), r)
        batch = {(int(a), int(b)): int(c) for a, b, c in plan.batch}
        tally[_canonical(plan.specials, batch)] += 1
    return OutcomeHistogram(tally)


@pytest.mark.parametrize("loads", [(0, 0), (0, 0, 1)])
def test_pairing_matches_enumeration(loads):
    state = LoadState.from_counts(np.bincount(loads))
    obs = _observed_plans(state, 2, 100000, 21 + len(loads))
    assert chi_square_test(obs, _exact_plans(loads, 2)).p_value > ALPHA


def test_apply_batches_examples(rng):
    k = 5
    state = LoadState.from_counts([10, 3, 0, 2])
    plan = BlockPlan(NO_PAIRS, NO_LOADS, np.array([[0, 0, k]]))
    assert apply_batches(state, plan, two_choice(), rng).classes == {0: 5, 1: 8, 3: 2}
    plan = BlockPlan(NO_PAIRS, NO_LOADS, np.array([[1, 3, 2]]))
    assert apply_batches(state, plan, two_choice(), rng).classes == {0: 10, 1: 1, 2: 2, 3: 2}
    plan = BlockPlan(NO_PAIRS, NO_LOADS, np.array([[3, 1, 2]]))
    assert apply_batches(state, plan, threshold(1), rng).classes == {0: 10, 1: 1, 2: 2, 3: 2}
    plan = BlockPlan(NO_PAIRS, NO_LOADS, np.array([[2, 0, 1]]))
    with pytest.raises(InvariantError):
        apply_batches(state, plan, one_choice(), rng)


def test_apply_batches_binomial_split():
    q = tabulated("quarter", [[0.25]])
    state = LoadState.from_counts([0, 100, 0, 100])
    plan = BlockPlan(NO_PAIRS, NO_LOADS, np.array([[1, 3, 40]]))
    r = RandomSource(22)
    moved = [apply_batches(state, plan, q, r).classes.get(4, 0) for _ in range(20000)]
    assert abs(np.mean(moved) - 10) < 4 * math.sqrt(40 * 0.25 * 0.75 / 20000)
    assert abs(np.var(moved) - 7.5) < 0.5


def test_simulate_specials_examples(rng):
    state = LoadState.from_counts([3, 1])
    empty = BlockPlan(NO_PAIRS, NO_LOADS, NO_BATCH)
    assert simulate_specials(state, empty, two_choice(), rng) == state
    self_pair = BlockPlan(np.array([[0, 0]]), np.array([0]), NO_BATCH)
    for q in (one_choice(), two_choice(), threshold(0)):
        assert simulate_specials(state, self_pair, q, rng).classes == {0: 2, 1: 2}
    # A is first sample twice, partners B and C; all start empty
    fan = BlockPlan(np.array([[0, 1], [0, 2]]), np.array([0, 0, 0]), NO_BATCH)
    for _ in range(200):
        assert simulate_specials(LoadState.empty(4), fan, two_choice(), rng).classes == {0: 2, 1: 2}


def _exact_specials(state, plan, q):
    """Enumerate every order of the special pairs and every coin of q."""
    pairs = [tuple(p) for p in plan.pairs.tolist()]
    orders = list(itertools.permutations(range(len(pairs))))
    out = Counter()

    def walk(loads, rest, p):
        if not rest:
            counts = state.to_counts().tolist() + [0] * (max(loads) + 2)
            for l0, l1 in zip(plan.loads.tolist(), loads):
                counts[l0] -= 1
                counts[l1] += 1
            out[LoadState.from_counts(counts).key()] += p
            return
        a, b = pairs[rest[0]]
        p2 = Fraction(0) if a == b else q.exact_prob_second(loads[a], loads[b])
        for target, pt in ((a, 1 - p2), (b, p2)):
            if pt:
                new = list(loads)
                new[target] += 1
                walk(new, rest[1:], p * pt)

    for order in orders:
        walk(plan.loads.tolist(), order, Fraction(1, len(orders)))
    return ExactDistribution(dict(out))


SPECIAL_CASES = [
    # (pairs, block-start loads of the tracked ids)
    ([[0, 1], [2, 0]], [1, 0, 1]),
    ([[0, 1], [1, 2], [2, 0]], [0, 0, 0]),
    ([[0, 1], [0, 1], [1, 0]], [2, 1]),
    ([[0, 0], [1, 0], [0, 2], [3, 1]], [1, 1, 0, 2]),
]


@pytest.mark.parametrize("q", [two_choice(), threshold(0), threshold(1),
                               tabulated("mixed", [[0.5, 0.2, 0.7], [0.9, 0.5, 0.1],
                                                   [0.3, 0.6, 0.5]])],
                         ids=lambda q: q.name)
@pytest.mark.parametrize("case", range(len(SPECIAL_CASES)))
def test_simulate_specials_matches_enumeration(q, case):
    pairs, loads = SPECIAL_CASES[case]
    loads = np.array(loads)
    plan = BlockPlan(np.array(pairs), loads, NO_BATCH)
    state = LoadState.from_counts(np.bincount(loads, minlength=3) + 2)
    r = RandomSource(100 + case)
    obs = OutcomeHistogram(Counter(simulate_specials(state, plan, q, r).key()
                                   for _ in range(20000)))
    assert chi_square_test(obs, _exact_specials(state, plan, q)).p_value > ALPHA


# ---------------------------------------------------------- count thinning

@pytest.mark.parametrize("f", [0, 3, 10])
def test_thinning_extremes_equal_one_round(f):
    rows = simulate_many(3, 3, f, 200000, RandomSource(30 + f))
    cards = generate_many(3, 3, 200000, RandomSource(40 + f))
    assert chi_rows(rows, OutcomeHistogram.from_rows(cards)).p_value > ALPHA


def test_thinning_matches_exact_and_naive():
    exact = exact_count_thinning_distribution(3, 3, 1)
    fast = simulate_many(3, 3, 1, 10**6, RandomSource(50))
    slow = simulate_many(3, 3, 1, 10**6, RandomSource(51), engine="naive")
    assert chi_rows(fast, exact).p_value > ALPHA
    assert chi_rows(slow, exact).p_value > ALPHA
    assert chi_rows(fast, OutcomeHistogram.from_rows(slow)).p_value > ALPHA


def test_thinning_examples(rng):
    assert simulate_count_thinning(4, 0, 1, rng).classes == {0: 4}
    assert simulate_count_thinning(1, 6, 2, rng).classes == {6: 1}
    assert naive_count_thinning(1, 6, 0, rng).classes == {6: 1}
    s = simulate_count_thinning(10**6, 10**6, 1, rng)
    assert s.balls == 10**6 and s.n == 10**6


def test_thinning_midsize_against_naive():
    fast = simulate_many(20, 40, 2, 100000, RandomSource(52))
    slow = simulate_many(20, 40, 2, 100000, RandomSource(53), engine="naive")
    assert chi_rows(fast, OutcomeHistogram.from_rows(slow)).p_value > ALPHA


def test_unknown_engine(rng):
    with pytest.raises(ParameterError):
        simulate_many(3, 3, two_choice(), 10, rng, engine="magic")
