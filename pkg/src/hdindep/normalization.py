"""Centering and scaling constants for the sum-of-squares statistics.

The normalized forms are ``scale * (n * S_n - center)`` for the covariance
statistic and ``scale * (n * T_n - center)`` for the Spearman statistic; both
are compared with the standard normal law.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, log, sqrt
from typing import Optional, Union

import numpy as np

from .data import ColumnMoments

LARGE_P = "large-p"
GENERAL = "general"


@dataclass(frozen=True)
class NormalizationPlan:
    center: float
    scale: float
    regime: str
    variance_term: Optional[float]
    moment_source: str

    def normalize(self, n: int, statistic: float) -> float:
        return self.scale * (n * statistic - self.center)


@dataclass(frozen=True)
class RankMomentConstants:
    """Exact moments of normalized ranks: ``E N^4`` and ``E N_1^2 N_2^2``
    for two distinct rows of one column."""

    e_n4: float
    e_n2n2: float


def large_p_regime(n: int, p: int) -> bool:
    return p > n ** (5.0 / 3.0)


def cov_plan(
    n: int,
    p: int,
    moments: Union[ColumnMoments, np.ndarray, float],
    regime: Optional[str] = None,
) -> NormalizationPlan:
    """Constants for ``b_n (n S_n - a_n)``.

    ``moments`` is either the empirical :class:`ColumnMoments` of standardized
    data, an array of per-column fourth moments, or a single known population
    fourth moment shared by all columns (3 for Gaussian data). ``regime``
    overrides the ``p > n^(5/3)`` rule.
    """
    if n < 2 or p < 2:
        raise ValueError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    if isinstance(moments, ColumnMoments):
        m4 = np.asarray(moments.m4, dtype=np.float64)
        source = "empirical-m4"
    else:
        m4 = np.broadcast_to(np.asarray(moments, dtype=np.float64), (p,))
        source = "known-m4"
    if m4.shape != (p,):
        raise ValueError(f"expected {p} fourth moments, got {m4.shape}")
    if regime is None:
        regime = LARGE_P if large_p_regime(n, p) else GENERAL
    excess = m4 - 1.0
    total = float(excess.sum())
    a_n = float(comb(p, 2))

    if regime == LARGE_P:
        if total <= 0:
            raise ValueError(
                "sum of (m4 - 1) is not positive; the large-p scale is degenerate, "
                "use the general regime"
            )
        b_n = sqrt(n) / ((p - 1) * sqrt(total))
        return NormalizationPlan(a_n, b_n, LARGE_P, None, source)
    if regime != GENERAL:
        raise ValueError(f"unknown regime {regime!r}")

    cross = (total**2 - float(np.dot(excess, excess))) / 2.0
    v_n = (
        4.0 * (n * n - n) / (p * (p - 1.0))
        + 4.0 * n * cross / (p * p * (p - 1.0) ** 2)
        + 4.0 * n * total / (p * p)
    )
    if not v_n > 0:
        raise ValueError(f"variance term V_n = {v_n} is not positive")
    b_n = n / (a_n * sqrt(v_n))
    return NormalizationPlan(a_n, b_n, GENERAL, v_n, source)


def rank_moment_constants(n: int) -> RankMomentConstants:
    """Closed forms over the grid ``c_k = sqrt(12/(n^2-1)) (k - (n+1)/2)``.

    ``sum_k (k-(n+1)/2)^4 = n(n^2-1)(3n^2-7)/240`` gives
    ``E N^4 = 3(3n^2-7) / (5(n^2-1))``; with ``sum_k c_k^2 = n`` the
    distinct-row moment is ``(n - E N^4) / (n - 1)``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    e4 = 3.0 * (3.0 * n * n - 7.0) / (5.0 * (n * n - 1.0))
    e22 = (n - e4) / (n - 1.0)
    return RankMomentConstants(e_n4=e4, e_n2n2=e22)


def rank_plan(n: int, p: int) -> NormalizationPlan:
    """Constants for ``beta_n (n T_n - alpha_n)``; the O(1/p^2) remainder
    of the variance term is dropped."""
    if n < 3 or p < 2:
        raise ValueError(f"need n >= 3 and p >= 2, got n={n}, p={p}")
    k = rank_moment_constants(n)
    pairs = float(comb(p, 2))
    alpha_n = pairs * (1.0 + 1.0 / (n - 1.0))
    v = (4.0 * n * n * k.e_n2n2 + 2.0 * n * (k.e_n4 - 1.0) ** 2 - 4.0 * n) / (p * (p - 1.0))
    if not v > 0:
        raise ValueError(f"variance term V_n' = {v} is not positive")
    beta_n = n / (pairs * sqrt(v))
    return NormalizationPlan(alpha_n, beta_n, GENERAL, v, "exact-rank-moments")


def permutation_pair_moments(n: int, a4, b4):
    """Mean and variance of ``n r^2`` for ``r = (1/n) sum_k a_k b_pi(k)``, with
    ``pi`` a uniform random permutation and both columns standardized
    (sum 0, sum of squares ``n``). ``a4`` and ``b4`` are the sums of fourth
    powers of the two columns; broadcasting is allowed.

    Expands ``E U^4`` for ``U = sum_k a_k b_pi(k)`` over the coincidence
    patterns of the four row indices.
    """
    a4 = np.asarray(a4, dtype=np.float64)
    b4 = np.asarray(b4, dtype=np.float64)
    s2 = float(n) * n
    n1, n2, n3 = n - 1.0, n - 2.0, n - 3.0
    fourth = (
        a4 * b4 / n
        + 4.0 * a4 * b4 / (n * n1)
        + 3.0 * (s2 - a4) * (s2 - b4) / (n * n1)
        + 6.0 * (2.0 * a4 - s2) * (2.0 * b4 - s2) / (n * n1 * n2)
        + (3.0 * s2 - 6.0 * a4) * (3.0 * s2 - 6.0 * b4) / (n * n1 * n2 * n3)
    )
    mean = n / n1
    return mean, fourth / s2 - mean * mean


def standardized_plan(n: int, p: int, moments: Union[ColumnMoments, np.ndarray, float]) -> NormalizationPlan:
    """Exact null mean and variance of ``n S_n`` for column-standardized data.

    Under independence with i.i.d. rows, each standardized column is a
    uniformly permuted copy of its own values, so pairwise ``n r_ij^2`` have
    mean ``n/(n-1)`` and are mutually uncorrelated. ``moments`` supplies the
    per-column fourth moments (``m4 = sum x^4 / n``) of the standardized
    columns. The returned plan normalizes as ``scale * (n S_n - center)``.
    """
    if n < 4 or p < 2:
        raise ValueError(f"need n >= 4 and p >= 2, got n={n}, p={p}")
    if isinstance(moments, ColumnMoments):
        m4 = np.asarray(moments.m4, dtype=np.float64)
    else:
        m4 = np.broadcast_to(np.asarray(moments, dtype=np.float64), (p,))
    if m4.shape != (p,):
        raise ValueError(f"expected {p} fourth moments, got {m4.shape}")
    sums4 = n * m4
    # the pair variance is affine in each of a4 and b4: c0 + c1 (a4 + b4) + c2 a4 b4
    mean, c0 = permutation_pair_moments(n, 0.0, 0.0)
    _, v10 = permutation_pair_moments(n, 1.0, 0.0)
    _, v11 = permutation_pair_moments(n, 1.0, 1.0)
    c1 = v10 - c0
    c2 = v11 - c0 - 2.0 * c1
    pairs = comb(p, 2)
    total = float(sums4.sum())
    cross = (total * total - float(np.dot(sums4, sums4))) / 2.0
    variance = pairs * c0 + c1 * (p - 1) * total + c2 * cross
    if not variance > 0:
        raise ValueError(f"null variance {variance} is not positive")
    return NormalizationPlan(pairs * mean, 1.0 / sqrt(variance), GENERAL, variance, "permutation-exact")


def extreme_shift(p: int) -> float:
    """``4 log p - log log p``, the centering of ``n L_n^2``."""
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    return 4.0 * log(p) - log(log(p))


def normalize_extreme(n: int, p: int, max_abs: float) -> float:
    return n * max_abs * max_abs - extreme_shift(p)
