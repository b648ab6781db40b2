"""Pairwise kernels: sample covariances, Spearman correlations and the
four test statistics built from their off-diagonal entries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import DataMatrix


@dataclass(frozen=True)
class StatisticQuartet:
    """Sum of squares and largest magnitude of the off-diagonal entries of
    the sample covariance (``s_n``, ``l_n``) and Spearman (``t_n``, ``m_n``)
    matrices."""

    s_n: float
    l_n: float
    t_n: float
    m_n: float


@dataclass(frozen=True)
class RankMatrix:
    """Normalized ranks: column ranks affinely mapped to mean 0, mean square 1.

    ``has_ties`` is set when some column contained tied values; midranks are
    used in that case and the normalization identities hold only
    approximately.
    """

    values: np.ndarray
    has_ties: bool = False

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def rank_grid(n: int) -> np.ndarray:
    """Normalized rank values for ranks ``1..n`` in increasing order."""
    k = np.arange(1, n + 1, dtype=np.float64)
    return np.sqrt(12.0 / (n * n - 1.0)) * (k - (n + 1) / 2.0)


def _check_index(p: int, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < p:
            raise IndexError(f"column index {i} out of range for p={p}")


def sample_cov_entry(X: DataMatrix, i: int, j: int) -> float:
    """``X_i' X_j / n`` for 0-based column indices ``i`` and ``j``."""
    _check_index(X.p, i, j)
    return float(np.dot(X.values[:, i], X.values[:, j]) / X.n)


def compute_ranks(X: DataMatrix) -> RankMatrix:
    values = X.values
    n = X.n
    ordered = np.sort(values, axis=0)
    has_ties = bool(np.any(ordered[1:] == ordered[:-1]))
    if has_ties:
        ranks = rankdata(values, method="average", axis=0)
    else:
        ranks = np.empty_like(values)
        order = np.argsort(values, axis=0, kind="stable")
        np.put_along_axis(ranks, order, np.arange(1, n + 1, dtype=np.float64)[:, None], axis=0)
    scaled = np.sqrt(12.0 / (n * n - 1.0)) * (ranks - (n + 1) / 2.0)
    return RankMatrix(values=scaled, has_ties=has_ties)


def spearman_entry(R: RankMatrix, i: int, j: int) -> float:
    _check_index(R.p, i, j)
    return float(np.dot(R.values[:, i], R.values[:, j]) / R.n)


def offdiag_summary(gram: np.ndarray) -> tuple[float, float]:
    """Sum of squares and max magnitude over the strict upper triangle."""
    iu = np.triu_indices(gram.shape[0], k=1)
    upper = gram[iu]
    return float(np.dot(upper, upper)), float(np.max(np.abs(upper)))


def covariance_pair(X: DataMatrix) -> tuple[float, float]:
    """``(S_n, L_n)`` from the sample covariance ``X'X / n``."""
    v = X.values
    return offdiag_summary(v.T @ v / X.n)


def spearman_pair(R: RankMatrix) -> tuple[float, float]:
    """``(T_n, M_n)`` from the Spearman matrix ``N'N / n``."""
    v = R.values
    return offdiag_summary(v.T @ v / R.n)


def quartet(X: DataMatrix, ranks: RankMatrix | None = None) -> StatisticQuartet:
    """All four statistics of ``X``.

    The covariance pair is computed on ``X`` as given, so callers wanting the
    usual null calibration should pass standardized data. Ranks are computed
    from ``X`` unless supplied.
    """
    if ranks is None:
        ranks = compute_ranks(X)
    s_n, l_n = covariance_pair(X)
    t_n, m_n = spearman_pair(ranks)
    return StatisticQuartet(s_n=s_n, l_n=l_n, t_n=t_n, m_n=m_n)
