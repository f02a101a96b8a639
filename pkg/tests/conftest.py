import numpy as np
import pytest

from fastbins.rng import RandomSource
from fastbins.stats import OutcomeHistogram, chi_square_test

ALPHA = 1e-3

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return RandomSource(20240601)


def chi_rows(rows, expected):
    """Chi-square of zero-padded outcome rows against an exact law or histogram."""
    return chi_square_test(OutcomeHistogram.from_rows(np.asarray(rows)), expected)


def freq_within(hits, trials, p, sigmas=3.0):
    """Is an observed frequency within ``sigmas`` binomial standard errors of p?"""
    se = (p * (1 - p) / trials) ** 0.5
    return abs(hits / trials - p) <= sigmas * se


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
