"""Data generators for the six simulation models and the size/power harness."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .data import DataMatrix
from .empirical import default_tail_size
from .procedures import (
    EMPIRICAL,
    RANK_STATISTICS,
    STATISTIC_ORDER,
    STATISTICS,
    Calibration,
    TestConfig,
    decisions,
    prepare,
)
from .seeding import substream

MODEL_IDS = ("1a", "1b", "2a", "2b", "3a", "3b")
CAUCHY_MODELS = ("1b", "2b", "3b")
FULL_P_GRID = (50, 100, 200, 400, 600, 800, 1000)
REPORT_FIELDS = ("model", "p", "statistic", "frequency", "std_error", "reps", "seed")


@dataclass(frozen=True)
class ModelSpec:
    """One simulation model at dimensions ``(n, p)``.

    1a/1b: independent N(0,1) / Cauchy entries. 2a: Gaussian with a single
    correlated pair, ``sigma_12 = 2.5 sqrt(log p / n)``. 2b: Cauchy with
    ``x_1 = z_1 + c z_2``, ``x_2 = z_2 + c z_1``, ``c = sqrt(log p / n)``.
    3a: Gaussian with covariance ``I + (2 log p / p) 11'``. 3b: Cauchy with
    ``x_j = z_j + (1/(10p)) sum_{i != j} z_i``.
    """

    id: str
    n: int = 200
    p: int = 100

    def __post_init__(self):
        if self.id not in MODEL_IDS:
            raise ValueError(f"unknown model {self.id!r}; valid ids are {', '.join(MODEL_IDS)}")
        if self.n < 4 or self.p < 2:
            raise ValueError(f"need n >= 4 and p >= 2, got n={self.n}, p={self.p}")
        if self.id == "2a" and not 0 < self.sigma12 < 1:
            raise ValueError(f"model 2a needs n > 6.25 log p; sigma_12 = {self.sigma12:.4f}")

    @property
    def cauchy(self) -> bool:
        return self.id in CAUCHY_MODELS

    @property
    def sigma12(self) -> float:
        return 2.5 * math.sqrt(math.log(self.p) / self.n)

    @property
    def mixing(self) -> float:
        return math.sqrt(math.log(self.p) / self.n)

    @property
    def dense_offdiag(self) -> float:
        return 2.0 * math.log(self.p) / self.p


def generate(spec: ModelSpec, seed: Union[int, np.random.Generator]) -> DataMatrix:
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, f"model/{spec.id}", spec.n, spec.p)
    n, p = spec.n, spec.p
    if spec.cauchy:
        z = rng.standard_cauchy((n, p))
    else:
        z = rng.standard_normal((n, p))

    if spec.id in ("1a", "1b"):
        x = z
    elif spec.id == "2a":
        rho = spec.sigma12
        x = z
        x[:, 1] = rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]
    elif spec.id == "2b":
        c = spec.mixing
        x = z.copy()
        x[:, 0] = z[:, 0] + c * z[:, 1]
        x[:, 1] = z[:, 1] + c * z[:, 0]
    elif spec.id == "3a":
        # I + a 11' is identity plus rank one: add sqrt(a) * w to every coordinate
        w = rng.standard_normal((n, 1))
        x = z + math.sqrt(spec.dense_offdiag) * w
    else:
        x = z + (z.sum(axis=1, keepdims=True) - z) / (10.0 * p)
    return DataMatrix(x)


@dataclass(frozen=True)
class SimulationConfig:
    """Harness settings.

    By default every replicate is column-standardized before testing, as the
    ``test`` command does with user data, and the covariance statistics use
    the exact permutation-null constants. With ``standardize=False`` the raw
    Gaussian data are taken to have known zero mean and unit variance, and
    ``m4`` (default 3) feeds the fourth-moment constants.
    """

    n: int = 200
    alpha: float = 0.05
    reps: int = 500
    seed: int = 42
    m: Optional[int] = None
    rank_m: Optional[int] = None
    normal_samples: int = 10**6
    extreme_law: str = EMPIRICAL
    combined_law: str = EMPIRICAL
    standardize: bool = True
    m4: Optional[float] = None
    workers: int = 1
    cache_dir: Optional[str] = None

    def test_config(self, p_max: int) -> TestConfig:
        return TestConfig(
            alpha=self.alpha,
            extreme_law=self.extreme_law,
            combined_law=self.combined_law,
            standardize=self.standardize,
            m4=self.m4 if self.m4 is not None or self.standardize else 3.0,
            m=self.m if self.m is not None else default_tail_size(p_max),
            rank_m=self.rank_m,
            normal_samples=self.normal_samples,
            seed=self.seed,
            workers=self.workers,
            cache_dir=self.cache_dir,
        )


@dataclass(frozen=True)
class ReportRow:
    model: str
    p: int
    statistic: str
    frequency: float
    std_error: float
    reps: int
    seed: int


@dataclass
class SimulationReport:
    rows: list = field(default_factory=list)

    def frequency(self, model: str, p: int, statistic: str) -> float:
        for row in self.rows:
            if (row.model, row.p, row.statistic) == (model, p, statistic):
                return row.frequency
        raise KeyError((model, p, statistic))

    @property
    def models(self) -> list:
        return list(dict.fromkeys(r.model for r in self.rows))

    @property
    def p_grid(self) -> list:
        return sorted({r.p for r in self.rows})


def statistics_for(model: str, statistics: Sequence[str]) -> tuple:
    if model in CAUCHY_MODELS:
        return tuple(s for s in statistics if s in RANK_STATISTICS)
    return tuple(statistics)


def rejection_bitmap(
    spec: ModelSpec,
    calibration: Calibration,
    statistics: Sequence[str],
    alpha: float,
    seed: int,
    reps: int,
    workers: int = 1,
) -> np.ndarray:
    """``reps x len(statistics)`` reject flags; replicate ``r`` uses stream
    ``(seed, "replicate/<model>", n, p, r)``."""
    cfg = calibration.config
    need_cov = any(STATISTICS[s][1] == "covariance" for s in statistics)
    for name in statistics:
        family, kind = STATISTICS[name]
        which = {"quadratic": "analytic", "extreme": cfg.extreme_law, "combined": cfg.combined_law}[family]
        calibration.threshold(family, kind, which, alpha)

    def one(r):
        rng = substream(seed, f"replicate/{spec.id}", spec.n, spec.p, r)
        X = generate(spec, rng)
        prepared = prepare(X, cfg.standardize, cfg.m4, need_covariance=need_cov)
        return decisions(prepared, calibration, statistics, alpha)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        flags = list(pool.map(one, range(reps)))
    return np.array(flags, dtype=bool).reshape(reps, len(statistics))


def run_grid(
    models: Iterable[str],
    p_grid: Iterable[int],
    statistics: Sequence[str] = STATISTIC_ORDER,
    config: SimulationConfig = SimulationConfig(),
) -> SimulationReport:
    """Rejection frequencies for every (model, p, statistic).

    Thresholds are computed once per ``(n, p, kind)``; tail tables are shared
    across ``p`` because one simulated pair's law does not depend on ``p``.
    Cauchy models report only the rank statistics.
    """
    if config.reps < 1:
        raise ValueError("need at least one replicate")
    models = list(models)
    p_grid = list(p_grid)
    for model in models:
        if model not in MODEL_IDS:
            raise ValueError(f"unknown model {model!r}; valid ids are {', '.join(MODEL_IDS)}")
    report = SimulationReport()
    if not models or not p_grid:
        return report
    test_config = config.test_config(max(p_grid))
    tails: dict = {}
    for model in models:
        stats = statistics_for(model, statistics)
        if not stats:
            continue
        for p in p_grid:
            spec = ModelSpec(model, config.n, p)
            calibration = Calibration(config.n, p, test_config, tails=tails)
            flags = rejection_bitmap(
                spec, calibration, stats, config.alpha, config.seed, config.reps, config.workers
            )
            freq = flags.mean(axis=0)
            for name, f in zip(stats, freq):
                se = math.sqrt(f * (1.0 - f) / config.reps)
                report.rows.append(ReportRow(model, p, name, float(f), se, config.reps, config.seed))
    return report


# -- rendering ----------------------------------------------------------------


def write_report_csv(report: SimulationReport, target=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for r in report.rows:
        writer.writerow([r.model, r.p, r.statistic, repr(r.frequency), repr(r.std_error), r.reps, r.seed])
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
    return text


def read_report_csv(source) -> SimulationReport:
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != REPORT_FIELDS:
        raise ValueError(f"report CSV must have columns {', '.join(REPORT_FIELDS)}")
    rows = [
        ReportRow(
            model=d["model"],
            p=int(d["p"]),
            statistic=d["statistic"],
            frequency=float(d["frequency"]),
            std_error=float(d["std_error"]),
            reps=int(d["reps"]),
            seed=int(d["seed"]),
        )
        for d in reader
    ]
    return SimulationReport(rows)


def _table_groups(models: Sequence[str]) -> list:
    groups: dict = {}
    for m in models:
        groups.setdefault(m[0], []).append(m)
    return [sorted(g) for _, g in sorted(groups.items())]


def report_tables(report: SimulationReport, fmt: str = "text") -> str:
    """Wide tables, one per model family, rows by ``p`` and columns in the
    order S, L, TS1, T, M, TS2 (rank statistics only for Cauchy models)."""
    if fmt not in ("text", "csv"):
        raise ValueError(f"format must be 'text' or 'csv', got {fmt!r}")
    cells = {(r.model, r.p, r.statistic): r.frequency for r in report.rows}
    present = {(r.model, r.statistic) for r in report.rows}
    groups = _table_groups(report.models)
    if not groups:
        groups = [[]]
    out = []
    for group in groups:
        columns = [
            (model, stat)
            for model in group
            for stat in statistics_for(model, STATISTIC_ORDER)
            if (model, stat) in present
        ]
        header = ["p"] + [f"{m}:{s}" for m, s in columns]
        ps = sorted({r.p for r in report.rows if r.model in group})
        body = [
            [str(p)] + [_fmt(cells.get((m, p, s))) for m, s in columns] for p in ps
        ]
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(body)
            out.append(buf.getvalue())
        else:
            widths = [max(len(row[k]) for row in [header, *body]) for k in range(len(header))]
            lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [header, *body]]
            lines.insert(1, "  ".join("-" * w for w in widths))
            out.append("\n".join(lines) + "\n")
    return "\n".join(out)


def _fmt(value) -> str:
    return "" if value is None else f"{value:.4f}"
