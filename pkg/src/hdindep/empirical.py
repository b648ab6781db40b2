"""Simulated null tails for the maximum statistics and the thresholds and
p-values derived from them.

The maxima are calibrated through ``lambda(y)``, the expected number of the
``C(p, 2)`` pairs whose squared scaled entry exceeds ``4 log p - log log p + y``.
Since every pair has the same null law, ``lambda`` is estimated from ``m``
simulated independent column pairs, and the intermediate law is estimated by
``exp(-lambda_hat)``.
"""

from __future__ import annotations

import math
import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .normalization import extreme_shift
from .seeding import substream
from .stats import rank_grid

COVARIANCE = "covariance"
SPEARMAN = "spearman"
KINDS = (COVARIANCE, SPEARMAN)

MAX_TAIL_SIZE = 10**8
DEFAULT_RETAIN = 1 << 22
_SHARD_ELEMENTS = 1 << 21
_FAST_SHARD = 1 << 20
_DKW_DELTA = 0.01

Sampler = Callable[[np.random.Generator, tuple], np.ndarray]


class LowResolutionWarning(UserWarning):
    """Fewer than 10 simulated pairs lie beyond the requested cut."""


@dataclass(frozen=True)
class EmpiricalTail:
    """Ascending simulated values of ``n * sigma_12^2`` (or ``n * r_12^2``).

    Only the largest ``len(sorted_samples)`` of the ``m`` draws are kept when
    ``m`` exceeds the retention limit; counts below the smallest kept value
    are then lower bounds.
    """

    n: int
    p: int
    m: int
    kind: str
    sorted_samples: np.ndarray
    seed: int
    sampler_id: str = "normal"
    standardized: bool = False

    @property
    def dkw_epsilon(self) -> float:
        return math.sqrt(math.log(2.0 / _DKW_DELTA) / (2.0 * self.m))

    @property
    def truncated(self) -> bool:
        return len(self.sorted_samples) < self.m

    @property
    def pairs(self) -> float:
        return self.p * (self.p - 1) / 2.0

    def lambda_error_bound(self) -> float:
        """Additive DKW bound on ``lambda_hat`` holding with probability 0.99."""
        return self.pairs * self.dkw_epsilon

    def for_dimension(self, p: int) -> "EmpiricalTail":
        """The same simulated pairs, read at another dimension."""
        if p < 2:
            raise ValueError(f"need p >= 2, got {p}")
        return replace(self, p=p)


def default_tail_size(p: int) -> int:
    m = max(10**6, 100 * p * p)
    if m > MAX_TAIL_SIZE:
        warnings.warn(f"tail size capped at {MAX_TAIL_SIZE:.0e} (100 p^2 = {m:.2e})", stacklevel=2)
        m = MAX_TAIL_SIZE
    return m


def _standardize_rows(a: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(a * a, axis=1, keepdims=True))
    if np.any(sd == 0):
        raise ValueError("null sampler produced a constant column")
    return a / sd


def _shard_plan(m: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(size, m - start)) for i, start in enumerate(range(0, m, size))]


def _top(values: np.ndarray, keep: int) -> np.ndarray:
    if len(values) <= keep:
        return values
    return np.partition(values, len(values) - keep)[len(values) - keep:]


def simulate_tail(
    n: int,
    p: int,
    m: int,
    kind: str = COVARIANCE,
    null_sampler: Optional[Sampler] = None,
    seed: int = 0,
    *,
    sampler_id: Optional[str] = None,
    standardized: bool = False,
    retain: int = DEFAULT_RETAIN,
    workers: int = 1,
    strict: bool = False,
) -> EmpiricalTail:
    """Draw ``m`` independent null pairs and record ``n * stat^2`` for each.

    Spearman pairs are simulated as a random permutation of the rank grid
    against the fixed grid, which is the exact null law for continuous data
    whatever the marginal. Covariance pairs use ``null_sampler(rng, shape)``;
    without one, standard normal columns are drawn through the exact
    representation ``n sigma^2 = (chi2_n / n) Z^2`` (``n r^2`` with
    ``r^2 ~ Beta(1/2, (n-2)/2)`` when ``standardized``), which avoids
    materializing the ``n``-vectors.

    Work is split in fixed shards, each with its own stream
    ``(seed, label, n, shard)``, so output is independent of ``workers``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if m < 1:
        raise ValueError("need at least one simulated pair")
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if strict and m < 100 * p * p:
        raise ValueError(f"strict mode needs m >= 100 p^2 = {100 * p * p}, got {m}")

    if kind == SPEARMAN:
        sampler_id = "permutation"
        grid = rank_grid(n)
        plan = _shard_plan(m, max(1, _SHARD_ELEMENTS // n))

        def shard(job):
            idx, size = job
            rng = substream(seed, "tail/spearman", n, idx)
            perm = rng.permuted(np.broadcast_to(grid, (size, n)), axis=1)
            dots = perm @ grid
            return _top(dots * dots / n, retain)

    elif null_sampler is None:
        sampler_id = "normal"
        plan = _shard_plan(m, _FAST_SHARD)

        def shard(job):
            idx, size = job
            rng = substream(seed, "tail/covariance/normal", n, int(standardized), idx)
            if standardized:
                vals = n * rng.beta(0.5, (n - 2) / 2.0, size)
            else:
                vals = rng.chisquare(n, size) / n * rng.standard_normal(size) ** 2
            return _top(vals, retain)

    else:
        if sampler_id is None:
            sampler_id = getattr(null_sampler, "__name__", "custom")
        plan = _shard_plan(m, max(1, _SHARD_ELEMENTS // (2 * n)))

        def shard(job):
            idx, size = job
            rng = substream(seed, f"tail/covariance/{sampler_id}", n, int(standardized), idx)
            x = np.asarray(null_sampler(rng, (size, n)), dtype=np.float64)
            y = np.asarray(null_sampler(rng, (size, n)), dtype=np.float64)
            if standardized:
                x, y = _standardize_rows(x), _standardize_rows(y)
            elif np.any(np.ptp(x, axis=1) == 0) or np.any(np.ptp(y, axis=1) == 0):
                raise ValueError("null sampler produced a constant column")
            dots = np.einsum("ij,ij->i", x, y)
            return _top(dots * dots / n, retain)

    kept = np.empty(0)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        pending = []
        for part in pool.map(shard, plan):
            pending.append(part)
            if sum(len(a) for a in pending) > 2 * retain:
                kept = _top(np.concatenate([kept, *pending]), retain)
                pending = []
    kept = np.sort(_top(np.concatenate([kept, *pending]), retain))
    kept.setflags(write=False)
    return EmpiricalTail(
        n=n,
        p=p,
        m=m,
        kind=kind,
        sorted_samples=kept,
        seed=seed,
        sampler_id=sampler_id,
        standardized=standardized,
    )


def exceedance_counts(tail: EmpiricalTail, cut) -> np.ndarray:
    """Number of samples ``>= cut``."""
    s = tail.sorted_samples
    return len(s) - np.searchsorted(s, cut, side="left")


def empirical_lambda(tail: EmpiricalTail, y, warn: bool = True):
    """``lambda_hat(y) = C(p,2) * #{samples >= 4 log p - log log p + y} / m``."""
    y = np.asarray(y, dtype=np.float64)
    cut = np.maximum(extreme_shift(tail.p) + y, 0.0)
    counts = exceedance_counts(tail, cut)
    if warn and np.any(counts < 10):
        warnings.warn(
            f"only {int(np.min(counts))} of {tail.m} simulated pairs beyond the cut; "
            "tail estimate has low resolution",
            LowResolutionWarning,
            stacklevel=2,
        )
    lam = tail.pairs * counts / tail.m
    return float(lam) if lam.ndim == 0 else lam


def empirical_cdf(tail: EmpiricalTail, y, warn: bool = True):
    return np.exp(-np.asarray(empirical_lambda(tail, y, warn=warn)))


class EmpiricalExtremeLaw:
    """Threshold and p-values for ``n max^2 - 4 log p + log log p`` from one tail.

    ``sf(v) = 1 - exp(-lambda_hat(v))``. The threshold for level ``alpha`` sits
    between consecutive order statistics so that ``v >= threshold`` exactly
    when ``sf(v) <= alpha``.
    """

    def __init__(self, tail: EmpiricalTail):
        self.tail = tail
        self.shift = extreme_shift(tail.p)

    def sf(self, v):
        lam = empirical_lambda(self.tail, v, warn=False)
        return -np.expm1(-np.asarray(lam))

    def threshold(self, alpha: float) -> float:
        _check_alpha(alpha)
        tail = self.tail
        s = tail.sorted_samples
        k = len(s)
        budget = int(math.floor(tail.m * -math.log1p(-alpha) / tail.pairs))
        if budget >= tail.m:
            return -math.inf
        if budget >= k:
            raise ValueError(
                f"alpha={alpha} reaches below the {k} retained samples; simulate with a larger retain"
            )
        upper = s[k - 1 - budget]
        if budget == 0:
            cut = upper + max(abs(upper), 1.0) * 1e-12
        else:
            cut = 0.5 * (upper + s[k - budget])
        return float(cut - self.shift)

    def inverse_cdf(self, u) -> np.ndarray:
        """Smallest ``y`` with ``F_hat(y) >= u``, for ``u`` in (0, 1)."""
        tail = self.tail
        s = tail.sorted_samples
        k = len(s)
        budget = np.floor(tail.m * -np.log(np.asarray(u, dtype=np.float64)) / tail.pairs)
        budget = np.minimum(budget, np.iinfo(np.int64).max / 2).astype(np.int64)
        inside = budget < k
        floor_value = s[0] if tail.truncated else 0.0
        cuts = np.where(inside, s[np.clip(k - 1 - budget, 0, k - 1)], floor_value)
        return cuts - self.shift


class EmpiricalCombinedLaw:
    """Law of ``Z + G`` with ``Z ~ N(0,1)`` and ``G`` drawn from ``F_hat`` by
    inverse transform, represented by ``normal_samples`` seeded paired draws."""

    def __init__(self, tail: EmpiricalTail, normal_samples: int = 10**6, seed: int = 0):
        if normal_samples < 1:
            raise ValueError("need at least one convolution draw")
        self.tail = tail
        rng = substream(seed, "combined", tail.n, tail.p, normal_samples)
        z = rng.standard_normal(normal_samples)
        u = rng.random(normal_samples)
        u = np.where(u > 0, u, np.nextafter(0.0, 1.0))
        g = EmpiricalExtremeLaw(tail).inverse_cdf(u)
        sums = np.sort(z + g)
        sums.setflags(write=False)
        self.sums = sums

    def sf(self, v):
        v = np.asarray(v, dtype=np.float64)
        b = len(self.sums)
        out = (b - np.searchsorted(self.sums, v, side="left")) / b
        return float(out) if out.ndim == 0 else out

    def threshold(self, alpha: float) -> float:
        _check_alpha(alpha)
        s = self.sums
        b = len(s)
        k = math.ceil(b + 1 - alpha * b) - 1  # 0-based first order statistic to reject at
        if k <= 0:
            return -math.inf
        if k >= b:
            return float(s[-1] + max(abs(s[-1]), 1.0) * 1e-12)
        return float(0.5 * (s[k - 1] + s[k]))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def empirical_threshold(
    tail: EmpiricalTail,
    alpha: float,
    combined: bool = False,
    normal_samples: int = 10**6,
    seed: int = 0,
) -> float:
    """Level-``alpha`` threshold for the normalized maximum (``combined=False``)
    or for normalized sum plus normalized maximum (``combined=True``)."""
    if combined:
        return EmpiricalCombinedLaw(tail, normal_samples, seed).threshold(alpha)
    return EmpiricalExtremeLaw(tail).threshold(alpha)


# -- binary cache -----------------------------------------------------------

MAGIC = b"HDTAIL\x00\x01"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIIBQQQBH")
_KIND_CODES = {COVARIANCE: 0, SPEARMAN: 1}


class CacheError(ValueError):
    """A tail cache file is unreadable, corrupted or from another version."""


def save_tail(tail: EmpiricalTail, path) -> None:
    """Header (magic, version, n, kind, m, seed, retained count, standardized,
    sampler id) followed by little-endian float64 samples."""
    sid = tail.sampler_id.encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        CACHE_VERSION,
        tail.n,
        _KIND_CODES[tail.kind],
        tail.m,
        tail.seed,
        len(tail.sorted_samples),
        int(tail.standardized),
        len(sid),
    )
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(sid)
        fh.write(np.asarray(tail.sorted_samples, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_tail(path, p: int) -> EmpiricalTail:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CacheError("truncated header")
    magic, version, n, code, m, seed, count, std, sid_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CacheError("bad magic")
    if version != CACHE_VERSION:
        raise CacheError(f"cache version {version}, expected {CACHE_VERSION}")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if code not in kinds:
        raise CacheError(f"unknown kind code {code}")
    start = _HEADER.size + sid_len
    if len(raw) != start + 8 * count:
        raise CacheError("payload length does not match header")
    samples = np.frombuffer(raw, dtype="<f8", count=count, offset=start).astype(np.float64)
    if count == 0 or count > m or np.any(np.diff(samples) < 0) or samples[0] < 0:
        raise CacheError("samples are not a sorted non-negative array")
    samples.setflags(write=False)
    return EmpiricalTail(
        n=n,
        p=p,
        m=m,
        kind=kinds[code],
        sorted_samples=samples,
        seed=seed,
        sampler_id=raw[_HEADER.size:start].decode("utf-8"),
        standardized=bool(std),
    )


def cache_dir_from_env() -> Optional[Path]:
    value = os.environ.get("HDTEST_CACHE_DIR")
    return Path(value) if value else None


def cache_path(cache_dir, n: int, kind: str, m: int, seed: int, sampler_id: str, standardized: bool) -> Path:
    tag = "std" if standardized else "raw"
    return Path(cache_dir) / f"tail-{kind}-{sampler_id}-{tag}-n{n}-m{m}-s{seed}.bin"


def cached_tail(
    n: int,
    p: int,
    m: int,
    kind: str,
    seed: int = 0,
    *,
    standardized: bool = False,
    cache_dir=None,
    workers: int = 1,
) -> tuple[EmpiricalTail, str]:
    """Load the tail for ``(n, kind, m, seed, sampler)`` from the cache or
    simulate and store it. Returns the tail and one of ``"hit"``, ``"miss"``,
    ``"recomputed"`` or ``"uncached"``. Only the built-in samplers are cached.
    """
    if cache_dir is None:
        cache_dir = cache_dir_from_env()
    sampler_id = "permutation" if kind == SPEARMAN else "normal"
    std = standardized and kind == COVARIANCE
    if cache_dir is None:
        return simulate_tail(n, p, m, kind, seed=seed, standardized=std, workers=workers), "uncached"
    path = cache_path(cache_dir, n, kind, m, seed, sampler_id, std)
    status = "miss"
    if path.exists():
        try:
            tail = load_tail(path, p)
            if (tail.n, tail.kind, tail.m, tail.seed, tail.sampler_id, tail.standardized) != (
                n, kind, m, seed, sampler_id, std
            ):
                raise CacheError("key fields do not match the file name")
            return tail, "hit"
        except (CacheError, OSError, UnicodeDecodeError) as exc:
            warnings.warn(f"ignoring tail cache {path}: {exc}; recomputing", stacklevel=2)
            status = "recomputed"
    tail = simulate_tail(n, p, m, kind, seed=seed, standardized=std, workers=workers)
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    save_tail(tail, path)
    return tail, status
