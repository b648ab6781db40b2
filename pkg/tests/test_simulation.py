import io
import math

import numpy as np
import pytest

from hdindep.simulation import (
    MODEL_IDS,
    ModelSpec,
    SimulationConfig,
    SimulationReport,
    ReportRow,
    generate,
    read_report_csv,
    report_tables,
    run_grid,
    statistics_for,
    write_report_csv,
)

QUICK = dict(reps=4, m=100_000, normal_samples=20_000)


def test_model_1a_mean():
    X = generate(ModelSpec("1a", 200, 100), seed=1)
    assert abs(X.values.mean()) < 4 / math.sqrt(200 * 100)


def test_model_2a_correlation():
    rho = ModelSpec("2a", 200, 100).sigma12
    assert rho == pytest.approx(0.37927, abs=1e-4)
    rows = _rows("2a", 100, 10_000)
    assert np.corrcoef(rows[:, 0], rows[:, 1])[0, 1] == pytest.approx(rho, abs=0.03)


def _rows(model, p, rows, n=200, seed=5):
    """Stack independent n-row draws of one model until ``rows`` rows exist."""
    reps = math.ceil(rows / n)
    return np.vstack([generate(ModelSpec(model, n, p), seed=seed + r).values for r in range(reps)])[:rows]


def test_model_3a_covariance():
    X = _rows("3a", 50, 10_000)
    C = X.T @ X / len(X)
    off = C[~np.eye(50, dtype=bool)].mean()
    assert off == pytest.approx(2 * math.log(50) / 50, abs=0.01)
    assert 2 * math.log(50) / 50 == pytest.approx(0.15648, abs=1e-5)


def test_cauchy_models():
    X = generate(ModelSpec("2b", 200, 30), seed=1).values
    assert np.median(np.abs(X[:, 5])) == pytest.approx(1.0, abs=0.3)
    Y = generate(ModelSpec("3b", 200, 30), seed=1).values
    assert Y.shape == (200, 30)


def test_generate_reproducible():
    for model in MODEL_IDS:
        a = generate(ModelSpec(model, 50, 20), seed=8).values
        b = generate(ModelSpec(model, 50, 20), seed=8).values
        assert np.array_equal(a, b)


def test_spec_validation():
    with pytest.raises(ValueError, match="valid ids"):
        ModelSpec("9z")
    with pytest.raises(ValueError, match="2a"):
        ModelSpec("2a", n=10, p=200)
    with pytest.raises(ValueError):
        ModelSpec("1a", n=200, p=1)


def test_statistics_for():
    assert statistics_for("1b", ("S", "L", "TS1", "T", "M", "TS2")) == ("T", "M", "TS2")
    assert statistics_for("1a", ("S", "T")) == ("S", "T")


@pytest.fixture(scope="module")
def quick_config(tail_cache):
    return SimulationConfig(seed=7, cache_dir=tail_cache, **QUICK)


def test_run_grid_shape_and_reproducibility(quick_config):
    a = run_grid(["1a", "1b"], [20, 30], config=quick_config)
    b = run_grid(["1a", "1b"], [20, 30], config=quick_config)
    assert a.rows == b.rows
    assert len(a.rows) == 2 * 6 + 2 * 3
    assert {r.statistic for r in a.rows if r.model == "1b"} == {"T", "M", "TS2"}
    for r in a.rows:
        assert 0 <= r.frequency <= 1
        assert r.std_error == pytest.approx(math.sqrt(r.frequency * (1 - r.frequency) / r.reps))


def test_single_replicate(quick_config):
    cfg = SimulationConfig(reps=1, m=100_000, normal_samples=20_000, seed=1, cache_dir=quick_config.cache_dir)
    report = run_grid(["2a"], [20], config=cfg)
    assert all(r.frequency in (0.0, 1.0) for r in report.rows)


def test_run_grid_validation(quick_config):
    with pytest.raises(ValueError):
        run_grid(["1a"], [20], config=SimulationConfig(reps=0))
    with pytest.raises(ValueError, match="valid ids"):
        run_grid(["4c"], [20], config=quick_config)
    assert run_grid([], [20], config=quick_config).rows == []


def _table1_like():
    rows = []
    for p in (50, 100):
        for k, s in enumerate(("S", "L", "TS1", "T", "M", "TS2")):
            rows.append(ReportRow("1a", p, s, 0.05 + k / 1000, 0.01, 500, 42))
        for s in ("T", "M", "TS2"):
            rows.append(ReportRow("1b", p, s, 0.0607, 0.0107, 500, 42))
    return SimulationReport(rows)


def test_csv_round_trip(tmp_path):
    report = _table1_like()
    path = tmp_path / "r.csv"
    write_report_csv(report, path)
    assert read_report_csv(path).rows == report.rows
    assert read_report_csv(io.StringIO(write_report_csv(report))).rows == report.rows
    with pytest.raises(ValueError, match="columns"):
        read_report_csv(io.StringIO("a,b\n1,2\n"))


def test_tables():
    text = report_tables(_table1_like())
    lines = text.strip().splitlines()
    assert lines[0].split() == ["p", "1a:S", "1a:L", "1a:TS1", "1a:T", "1a:M", "1a:TS2", "1b:T", "1b:M", "1b:TS2"]
    assert lines[2].split()[0] == "50" and lines[3].split()[0] == "100"
    assert "0.0607" in lines[2]
    csv_text = report_tables(_table1_like(), "csv")
    assert csv_text.splitlines()[0].startswith("p,1a:S,1a:L")


def test_empty_and_single_cell_tables():
    assert report_tables(SimulationReport()).strip().splitlines()[0].strip() == "p"
    one = SimulationReport([ReportRow("3a", 200, "S", 1.0, 0.0, 300, 42)])
    lines = report_tables(one, "csv").strip().splitlines()
    assert lines == ["p,3a:S", "200,1.0000"]
    with pytest.raises(ValueError):
        report_tables(one, "html")


def test_table_groups_by_family():
    rows = [ReportRow("2a", 50, "L", 0.9, 0.01, 10, 1), ReportRow("3a", 50, "S", 0.99, 0.01, 10, 1)]
    tables = report_tables(SimulationReport(rows), "csv").strip().split("\n\n")
    assert [t.splitlines()[0] for t in tables] == ["p,2a:L", "p,3a:S"]
