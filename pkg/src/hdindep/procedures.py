"""Independence tests built from the four statistics.

Normalized values:

* quadratic: ``b_n (n S_n - a_n)`` or ``beta_n (n T_n - alpha_n)``, against ``N(0, 1)``;
* extreme: ``n L_n^2 - 4 log p + log log p`` (``M_n`` for ranks), against the
  intermediate law, analytic or simulated;
* combined: the sum of the two, against the normal convolution of that law.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from . import limits
from .data import DataMatrix, column_moments, standardize
from .empirical import (
    COVARIANCE,
    SPEARMAN,
    EmpiricalCombinedLaw,
    EmpiricalExtremeLaw,
    EmpiricalTail,
    cached_tail,
    default_tail_size,
)
from .normalization import cov_plan, normalize_extreme, rank_plan, standardized_plan
from .stats import StatisticQuartet, compute_ranks, quartet, spearman_pair

ANALYTIC = "analytic"
EMPIRICAL = "empirical"
LAWS = (ANALYTIC, EMPIRICAL)

# statistic name -> (family, kind)
STATISTICS = {
    "S": ("quadratic", COVARIANCE),
    "L": ("extreme", COVARIANCE),
    "TS1": ("combined", COVARIANCE),
    "T": ("quadratic", SPEARMAN),
    "M": ("extreme", SPEARMAN),
    "TS2": ("combined", SPEARMAN),
}
STATISTIC_ORDER = ("S", "L", "TS1", "T", "M", "TS2")
RANK_STATISTICS = ("T", "M", "TS2")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: str
    raw: float
    normalized: float
    threshold: float
    reject: bool
    p_value: float
    law: str
    alpha: float
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestConfig:
    """Settings shared by all tests of one run.

    ``m4`` replaces the sample fourth moments with a known population value
    (3 for Gaussian data). ``m`` is the number of simulated null pairs per
    tail table (default ``max(10^6, 100 p^2)``); ``rank_m`` overrides it for
    the Spearman tables, whose permutation sampler is the slower one.
    """

    __test__ = False

    alpha: float = 0.05
    extreme_law: str = EMPIRICAL
    combined_law: str = EMPIRICAL
    standardize: bool = True
    m4: Optional[float] = None
    m: Optional[int] = None
    rank_m: Optional[int] = None
    normal_samples: int = 10**6
    seed: int = 0
    nodes: int = 96
    workers: int = 1
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("extreme_law", "combined_law"):
            if getattr(self, name) not in LAWS:
                raise ValueError(f"{name} must be one of {LAWS}, got {getattr(self, name)!r}")


class AnalyticExtremeLaw:
    def __init__(self, p: int):
        self.p = p

    def sf(self, v):
        return limits.intermediate_sf(v, self.p)

    def threshold(self, alpha: float) -> float:
        return limits.intermediate_upper_quantile(alpha, self.p)


class AnalyticCombinedLaw:
    def __init__(self, p: int, nodes: int = 96):
        self.p = p
        self.nodes = nodes

    def sf(self, v):
        return limits.convolution_sf(v, self.p, self.nodes)

    def threshold(self, alpha: float) -> float:
        return limits.convolution_upper_quantile(alpha, self.p, self.nodes)


@dataclass
class Calibration:
    """Null laws for one ``(n, p)``, built lazily and reused across datasets.

    Tail tables may be shared between calibrations of different ``p`` via
    ``tails``, since the law of a single pair does not depend on ``p``.
    """

    n: int
    p: int
    config: TestConfig = field(default_factory=TestConfig)
    tails: dict = field(default_factory=dict)
    _laws: dict = field(default_factory=dict, repr=False)
    _thresholds: dict = field(default_factory=dict, repr=False)

    def tail(self, kind: str) -> EmpiricalTail:
        cfg = self.config
        m = cfg.rank_m if kind == SPEARMAN and cfg.rank_m is not None else cfg.m
        if m is None:
            m = default_tail_size(self.p)
        std = cfg.standardize and kind == COVARIANCE
        key = (self.n, kind, m, cfg.seed, std)
        if key not in self.tails:
            self.tails[key], _ = cached_tail(
                self.n,
                self.p,
                m,
                kind,
                cfg.seed,
                standardized=std,
                cache_dir=cfg.cache_dir,
                workers=cfg.workers,
            )
        return self.tails[key].for_dimension(self.p)

    def law(self, family: str, kind: str, which: str):
        key = (family, kind, which)
        if key not in self._laws:
            if family == "extreme":
                law = (
                    AnalyticExtremeLaw(self.p)
                    if which == ANALYTIC
                    else EmpiricalExtremeLaw(self.tail(kind))
                )
            elif family == "combined":
                law = (
                    AnalyticCombinedLaw(self.p, self.config.nodes)
                    if which == ANALYTIC
                    else EmpiricalCombinedLaw(
                        self.tail(kind), self.config.normal_samples, self.config.seed
                    )
                )
            else:
                raise ValueError(f"no simulated law for family {family!r}")
            self._laws[key] = law
        return self._laws[key]

    def threshold(self, family: str, kind: str, which: str, alpha: float) -> float:
        key = (family, kind, which, alpha)
        if key not in self._thresholds:
            if family == "quadratic":
                self._thresholds[key] = float(norm.isf(alpha))
            else:
                self._thresholds[key] = self.law(family, kind, which).threshold(alpha)
        return self._thresholds[key]


@dataclass(frozen=True)
class Prepared:
    """Statistics and quadratic normalizations of one dataset."""

    n: int
    p: int
    quartet: StatisticQuartet
    cov_normalized: float
    rank_normalized: float

    def raw(self, name: str) -> float:
        q = self.quartet
        return {"S": q.s_n, "L": q.l_n, "T": q.t_n, "M": q.m_n}[name]

    def quadratic(self, kind: str) -> float:
        return self.cov_normalized if kind == COVARIANCE else self.rank_normalized

    def extreme(self, kind: str) -> float:
        q = self.quartet
        return normalize_extreme(self.n, self.p, q.l_n if kind == COVARIANCE else q.m_n)


def prepare(
    X: DataMatrix,
    standardize_data: bool = True,
    m4: Optional[float] = None,
    need_covariance: bool = True,
) -> Prepared:
    """Compute the quartet once and both quadratic normalizations.

    Ranks are taken from ``X`` as given (standardization does not change
    them). With ``standardize_data`` the covariance statistics use the
    standardized matrix and exact permutation-null constants; otherwise the
    data are taken to have known zero mean and unit variance and the
    fourth-moment constants of :func:`cov_plan` apply.
    """
    n, p = X.n, X.p
    ranks = compute_ranks(X)
    if need_covariance:
        Z = standardize(X) if standardize_data else X
        q = quartet(Z, ranks)
        moments = column_moments(Z) if m4 is None else m4
        plan = standardized_plan(n, p, moments) if standardize_data else cov_plan(n, p, moments)
        cov_norm = plan.normalize(n, q.s_n)
    else:
        t_n, m_n = spearman_pair(ranks)
        q = StatisticQuartet(s_n=math.nan, l_n=math.nan, t_n=t_n, m_n=m_n)
        cov_norm = math.nan
    rank_norm = rank_plan(n, p).normalize(n, q.t_n)
    return Prepared(n, p, q, cov_norm, rank_norm)


def _outcome(name, prepared, calibration, alpha, which) -> TestOutcome:
    family, kind = STATISTICS[name]
    if family == "quadratic":
        value = prepared.quadratic(kind)
        p_value = float(limits.normal_tail(value))
        which = ANALYTIC
        raw = prepared.raw(name)
    elif family == "extreme":
        value = prepared.extreme(kind)
        p_value = float(calibration.law(family, kind, which).sf(value))
        raw = prepared.raw(name)
    else:
        value = prepared.quadratic(kind) + prepared.extreme(kind)
        p_value = float(calibration.law(family, kind, which).sf(value))
        raw = value
    threshold = calibration.threshold(family, kind, which, alpha)
    seed = calibration.config.seed if which == EMPIRICAL else None
    return TestOutcome(
        statistic=name,
        raw=float(raw),
        normalized=float(value),
        threshold=float(threshold),
        reject=bool(value >= threshold),
        p_value=min(max(p_value, 0.0), 1.0),
        law=which,
        alpha=alpha,
        seed=seed,
    )


def _setup(X, config, calibration):
    if config is None:
        config = calibration.config if calibration is not None else TestConfig()
    if calibration is None:
        calibration = Calibration(X.n, X.p, config)
    elif (calibration.n, calibration.p) != (X.n, X.p):
        raise ValueError("calibration was built for different dimensions")
    return config, calibration


def test_quadratic(
    X: DataMatrix,
    alpha: float = 0.05,
    kind: str = COVARIANCE,
    config: Optional[TestConfig] = None,
) -> TestOutcome:
    config, calibration = _setup(X, config, None)
    prepared = prepare(X, config.standardize, config.m4)
    return _outcome("S" if kind == COVARIANCE else "T", prepared, calibration, alpha, ANALYTIC)


def test_extreme(
    X: DataMatrix,
    alpha: float = 0.05,
    kind: str = COVARIANCE,
    law_used: str = EMPIRICAL,
    config: Optional[TestConfig] = None,
    calibration: Optional[Calibration] = None,
) -> TestOutcome:
    config, calibration = _setup(X, config, calibration)
    prepared = prepare(X, config.standardize, config.m4)
    return _outcome("L" if kind == COVARIANCE else "M", prepared, calibration, alpha, law_used)


def test_combined(
    X: DataMatrix,
    alpha: float = 0.05,
    kind: str = COVARIANCE,
    law_used: str = EMPIRICAL,
    config: Optional[TestConfig] = None,
    calibration: Optional[Calibration] = None,
) -> TestOutcome:
    config, calibration = _setup(X, config, calibration)
    prepared = prepare(X, config.standardize, config.m4)
    return _outcome("TS1" if kind == COVARIANCE else "TS2", prepared, calibration, alpha, law_used)


def run_all(
    X: DataMatrix,
    config: Optional[TestConfig] = None,
    statistics=STATISTIC_ORDER,
    calibration: Optional[Calibration] = None,
) -> list[TestOutcome]:
    """Run the selected tests on ``X`` sharing one pass over the pairs."""
    config, calibration = _setup(X, config, calibration)
    unknown = set(statistics) - set(STATISTICS)
    if unknown:
        raise ValueError(f"unknown statistics {sorted(unknown)}; choose from {STATISTIC_ORDER}")
    need_cov = any(STATISTICS[s][1] == COVARIANCE for s in statistics)
    prepared = prepare(X, config.standardize, config.m4, need_covariance=need_cov)
    outcomes = []
    for name in statistics:
        family = STATISTICS[name][0]
        which = {"quadratic": ANALYTIC, "extreme": config.extreme_law, "combined": config.combined_law}[family]
        outcomes.append(_outcome(name, prepared, calibration, config.alpha, which))
    return outcomes


# keep pytest from collecting these when imported into test modules
test_quadratic.__test__ = False
test_extreme.__test__ = False
test_combined.__test__ = False


def outcomes_json(outcomes, **extra) -> str:
    payload = {"schema": 1, **extra, "outcomes": [o.to_dict() for o in outcomes]}
    return json.dumps(payload, indent=2, sort_keys=False)


def decisions(prepared: Prepared, calibration: Calibration, statistics, alpha: float) -> np.ndarray:
    """Reject flags for ``statistics`` without building outcome objects; the
    simulation loop calls this once per replicate."""
    cfg = calibration.config
    out = np.empty(len(statistics), dtype=bool)
    for k, name in enumerate(statistics):
        family, kind = STATISTICS[name]
        if family == "quadratic":
            value, which = prepared.quadratic(kind), ANALYTIC
        elif family == "extreme":
            value, which = prepared.extreme(kind), cfg.extreme_law
        else:
            value = prepared.quadratic(kind) + prepared.extreme(kind)
            which = cfg.combined_law
        out[k] = value >= calibration.threshold(family, kind, which, alpha)
    return out
