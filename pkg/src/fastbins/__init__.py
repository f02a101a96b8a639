"""Exact sublinear-time balls-into-bins simulation.

``generate_bin_cardinalities`` draws how many of ``n`` bins hold 0, 1, 2, ...
of ``m`` uniformly thrown balls without touching the bins, and
``simulate_twosample_fast`` runs Two-Choice, Threshold and other TwoSample
processes in blocks of about ``sqrt(n)`` steps.  Every fast path has a naive
oracle with the same distribution.
"""

from .cardinalities import (
    CardinalityVector, JointCardinalityMatrix, add_one_ball, auto_kstar,
    combine_and_sum, combine_cardinalities, default_kstar,
    generate_bin_cardinalities, naive_cardinalities, poissonized_cardinalities,
    remove_one_ball,
)
from .errors import CapacityError, EmptyStateError, InvariantError, ParameterError
from .rng import RandomSource
from .stats import (
    ExactDistribution, OutcomeHistogram, chi_square_test,
    exact_cardinality_distribution, exact_twosample_distribution,
)
from .twosample import (
    BlockPlan, DecisionFunction, LoadState, apply_batches, generate_block_counts,
    naive_twosample, one_choice, pair_samples, simulate_count_thinning,
    simulate_specials, simulate_twosample_fast, threshold, two_choice,
)
from .variates import (
    ClassCounts, binomial, hypergeometric, log_factorial_bounds, multinomial_lazy,
    multivariate_hypergeometric_lazy, poisson,
)

__version__ = "0.1.0"
