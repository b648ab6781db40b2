"""Tests of mutual independence for high-dimensional data that combine a
sum-of-squares statistic with a maximum statistic, for sample covariances
(``S``, ``L``, ``TS1``) and Spearman correlations (``T``, ``M``, ``TS2``)."""

from .data import ColumnMoments, DataError, DataMatrix, column_moments, load_matrix, standardize
from .empirical import EmpiricalTail, empirical_lambda, empirical_threshold, simulate_tail
from .limits import (
    LimitLaw,
    chi2_1_tail,
    convolution_upper_quantile,
    gumbel_cdf,
    intermediate_cdf,
    normal_cdf,
    normal_tail,
)
from .normalization import NormalizationPlan, cov_plan, rank_moment_constants, rank_plan
from .procedures import TestConfig, TestOutcome, run_all
from .stats import StatisticQuartet, compute_ranks, quartet

__version__ = "0.1.0"
