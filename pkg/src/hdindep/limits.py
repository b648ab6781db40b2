"""Limiting laws: normal, chi-square(1) tail, the finite-p intermediate law of
the normalized maximum, its Gumbel limit, and the normal convolution used to
calibrate the combined tests."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import log, pi, sqrt
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special
from scipy.stats import norm

from .normalization import extreme_shift

_SQRT_8PI = sqrt(8.0 * pi)


class NumericalError(RuntimeError):
    """A root search or quadrature failed to produce a usable answer."""


def normal_cdf(z):
    return special.ndtr(z)


def normal_tail(z):
    """``1 - Phi(z)`` via ``erfc``; accurate far into the upper tail."""
    return 0.5 * special.erfc(np.asarray(z, dtype=np.float64) / np.sqrt(2.0))


def chi2_1_tail(x):
    """``P(chi2(1) >= x) = 2 * normal_tail(sqrt(x)) = erfc(sqrt(x / 2))``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("chi-square argument must be non-negative")
    return special.erfc(np.sqrt(x / 2.0))


def intermediate_lambda(y, p: int):
    """Expected number of pairs beyond the cut: ``C(p,2) * P(chi2(1) >= shift + y)``.

    The chi-square argument is clamped at 0 for very negative ``y``.
    """
    if p < 2:
        raise ValueError(f"need p >= 2, got {p}")
    arg = np.maximum(extreme_shift(p) + np.asarray(y, dtype=np.float64), 0.0)
    return (p * p - p) / 2.0 * chi2_1_tail(arg)


def intermediate_cdf(y, p: int):
    return np.exp(-intermediate_lambda(y, p))


def intermediate_sf(y, p: int):
    """``1 - intermediate_cdf`` without cancellation."""
    return -np.expm1(-intermediate_lambda(y, p))


def intermediate_upper_quantile(alpha: float, p: int) -> float:
    """The ``y`` with ``1 - F(y) = alpha``, by closed-form inversion."""
    _check_alpha(alpha)
    lam = -np.log1p(-alpha)
    tail = 2.0 * lam / (p * p - p)
    if tail >= 1.0:
        # F never drops below exp(-C(p,2)) on the clamped domain
        return -extreme_shift(p)
    x = norm.isf(tail / 2.0) ** 2
    return float(x - extreme_shift(p))


def gumbel_cdf(y):
    return np.exp(-np.exp(-np.asarray(y, dtype=np.float64) / 2.0) / _SQRT_8PI)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


@lru_cache(maxsize=8)
def _nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    # probabilists' Hermite: weight exp(-z^2/2), weights sum to sqrt(2 pi)
    z, w = hermegauss(count)
    w = w / sqrt(2.0 * pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def convolution_cdf(c, p: int, nodes: int = 96, cdf: Optional[Callable] = None):
    """``H(c) = E[F(c - Z)]`` for standard normal ``Z`` by Gauss-Hermite
    quadrature; ``cdf`` defaults to the intermediate law at dimension ``p``."""
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes")
    if cdf is None:
        cdf = lambda y: intermediate_cdf(y, p)  # noqa: E731
    z, w = _nodes(nodes)
    c = np.asarray(c, dtype=np.float64)
    vals = cdf(c[..., None] - z)
    return np.clip(vals @ w, 0.0, 1.0)


def convolution_sf(c, p: int, nodes: int = 96, cdf: Optional[Callable] = None):
    if cdf is None:
        # sum 1 - F term by term to keep precision in the far upper tail
        z, w = _nodes(max(nodes, 64))
        c = np.asarray(c, dtype=np.float64)
        return np.clip(intermediate_sf(c[..., None] - z, p) @ w, 0.0, 1.0)
    return 1.0 - convolution_cdf(c, p, nodes, cdf)


def convolution_upper_quantile(
    alpha: float,
    p: int,
    nodes: int = 96,
    cdf: Optional[Callable] = None,
    tol: float = 1e-9,
) -> float:
    """``c`` with ``P(Z + G >= c) = alpha`` where ``Z ~ N(0,1)`` and ``G ~ F``.

    The bracket starts at [-10, 30] and is widened up to [-100, 100].
    Bisection stops once ``|H(c) - (1 - alpha)|`` is below ``tol``.
    """
    _check_alpha(alpha)
    target = 1.0 - alpha

    def gap(c):
        return float(convolution_cdf(c, p, nodes, cdf)) - target

    lo, hi = -10.0, 30.0
    while gap(lo) > 0 and lo > -100.0:
        lo = max(lo * 2.0, -100.0)
    while gap(hi) < 0 and hi < 100.0:
        hi = min(hi * 2.0, 100.0)
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 or g_hi < 0:
        raise NumericalError(f"cannot bracket the {alpha} upper quantile within [-100, 100]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) < tol or hi - lo < 1e-13:
            return mid
        if g < 0:
            lo = mid
        else:
            hi = mid
    raise NumericalError("bisection did not converge")


@dataclass(frozen=True)
class LimitLaw:
    """An evaluable CDF: ``normal``, ``intermediate``, ``gumbel`` or ``convolution``."""

    kind: str
    p: Optional[int] = None
    nodes: int = 96

    def __post_init__(self):
        if self.kind not in ("normal", "intermediate", "gumbel", "convolution"):
            raise ValueError(f"unknown law {self.kind!r}")
        if self.kind in ("intermediate", "convolution") and (self.p is None or self.p < 2):
            raise ValueError(f"{self.kind} law needs p >= 2")

    def cdf(self, x):
        if self.kind == "normal":
            return normal_cdf(x)
        if self.kind == "gumbel":
            return gumbel_cdf(x)
        if self.kind == "intermediate":
            return intermediate_cdf(x, self.p)
        return convolution_cdf(x, self.p, self.nodes)

    def sf(self, x):
        if self.kind == "normal":
            return normal_tail(x)
        if self.kind == "intermediate":
            return intermediate_sf(x, self.p)
        if self.kind == "convolution":
            return convolution_sf(x, self.p, self.nodes)
        return -np.expm1(-np.exp(-np.asarray(x, dtype=np.float64) / 2.0) / _SQRT_8PI)

    def upper_quantile(self, alpha: float) -> float:
        _check_alpha(alpha)
        if self.kind == "normal":
            return float(norm.isf(alpha))
        if self.kind == "intermediate":
            return intermediate_upper_quantile(alpha, self.p)
        if self.kind == "gumbel":
            return float(-2.0 * log(-_SQRT_8PI * np.log1p(-alpha)))
        return convolution_upper_quantile(alpha, self.p, self.nodes)
