import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdindep.data import DataMatrix
from hdindep.stats import (
    compute_ranks,
    quartet,
    rank_grid,
    sample_cov_entry,
    spearman_entry,
)

import oracles


def test_cov_entry_examples():
    X = DataMatrix(np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, 1.0], [-1.0, -1.0]]))
    assert sample_cov_entry(X, 0, 1) == 1.0
    Y = DataMatrix(np.array([[1.0, 1.0], [-1.0, 1.0]]))
    assert sample_cov_entry(Y, 0, 1) == 0.0


def test_cov_entry_matches_loop(rng):
    X = DataMatrix(rng.standard_normal((5, 3)))
    for i in range(3):
        for j in range(3):
            assert abs(sample_cov_entry(X, i, j) - oracles.cov_entry_loop(X.values, i, j)) < 1e-14


def test_index_out_of_range():
    X = DataMatrix(np.eye(3))
    with pytest.raises(IndexError):
        sample_cov_entry(X, 0, 3)
    with pytest.raises(IndexError):
        spearman_entry(compute_ranks(DataMatrix(np.arange(9.0).reshape(3, 3))), -1, 0)


def test_rank_example():
    R = compute_ranks(DataMatrix(np.array([[10.0, 1.0], [30.0, 2.0], [20.0, 3.0]])))
    npt.assert_allclose(R.values[:, 0], math.sqrt(12 / 8) * np.array([-1, 1, 0]))
    npt.assert_allclose(R.values[:, 1], rank_grid(3))
    assert not R.has_ties


def test_ranks_match_counting_oracle(rng):
    values = rng.standard_normal((20, 4))
    R = compute_ranks(DataMatrix(values))
    npt.assert_allclose(R.values, oracles.normalized_ranks_loop(values), atol=1e-15)
    npt.assert_allclose(R.values.sum(axis=0), 0.0, atol=1e-12)
    npt.assert_allclose((R.values**2).mean(axis=0), 1.0, rtol=1e-12)


def test_ties_use_midranks():
    R = compute_ranks(DataMatrix(np.array([[1.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])))
    assert R.has_ties
    scale = math.sqrt(12 / 15)
    npt.assert_allclose(R.values[:, 0], scale * (np.array([1.5, 1.5, 3, 4]) - 2.5))


def test_spearman_examples():
    a = np.arange(1.0, 5.0)
    R = compute_ranks(DataMatrix(np.column_stack([a, a, a[::-1], [2.0, 1.0, 4.0, 3.0]])))
    assert spearman_entry(R, 0, 1) == pytest.approx(1.0, abs=1e-15)
    assert spearman_entry(R, 0, 2) == pytest.approx(-1.0, abs=1e-15)
    # classical formula 1 - 6 sum d^2 / (n (n^2 - 1)) with sum d^2 = 4
    classical = 1 - 6 * 4 / (4 * 15)
    assert spearman_entry(R, 0, 3) == pytest.approx(classical, abs=1e-14)
    assert classical == pytest.approx(0.6)


def test_quartet_duplicated_column():
    col = np.array([1.0, -1.0, 1.0, -1.0]) + np.array([0, 0, 1e-9, 1e-9])
    q = quartet(DataMatrix(np.column_stack([col, col])))
    assert q.s_n == pytest.approx(1.0, abs=1e-8)
    assert q.l_n == pytest.approx(1.0, abs=1e-8)
    assert q.t_n == pytest.approx(1.0, abs=1e-12)
    assert q.m_n == pytest.approx(1.0, abs=1e-12)


def test_quartet_reversed_order(rng):
    x = rng.standard_normal(30)
    X = DataMatrix(np.column_stack([x, -x**3]))
    R = compute_ranks(X)
    assert spearman_entry(R, 0, 1) == pytest.approx(-1.0, abs=1e-12)
    assert quartet(X).m_n == pytest.approx(1.0, abs=1e-12)


def test_quartet_matches_brute_force(rng):
    values = rng.standard_normal((30, 6))
    q = quartet(DataMatrix(values))
    s, l, t, m = oracles.quartet_loop(values)
    npt.assert_allclose([q.s_n, q.l_n, q.t_n, q.m_n], [s, l, t, m], rtol=0, atol=1e-12)


continuous = st.tuples(st.integers(4, 30), st.integers(2, 8), st.integers(0, 2**32 - 1))


def _matrix(shape_seed):
    n, p, seed = shape_seed
    return np.random.default_rng(seed).standard_normal((n, p))


@given(continuous)
def test_quartet_consistency_property(shape_seed):
    values = _matrix(shape_seed)
    q = quartet(DataMatrix(values))
    s, l, t, m = oracles.quartet_loop(values)
    npt.assert_allclose([q.s_n, q.l_n, q.t_n, q.m_n], [s, l, t, m], rtol=0, atol=1e-12)
    assert q.s_n >= q.l_n**2 and q.t_n >= q.m_n**2
    assert 0 <= q.m_n <= 1 + 1e-12


@given(continuous, st.randoms())
def test_invariances(shape_seed, rnd):
    values = _matrix(shape_seed)
    n, p = values.shape
    q = quartet(DataMatrix(values))

    # strictly increasing per-column transforms leave rank statistics unchanged
    bent = np.column_stack([np.exp(values[:, 0]), values[:, 1:] ** 3 + 2 * values[:, 1:]])
    qb = quartet(DataMatrix(bent))
    assert (qb.t_n, qb.m_n) == pytest.approx((q.t_n, q.m_n), abs=1e-12)

    rows = list(range(n))
    rnd.shuffle(rows)
    qr = quartet(DataMatrix(values[rows]))
    npt.assert_allclose([qr.s_n, qr.l_n, qr.t_n, qr.m_n], [q.s_n, q.l_n, q.t_n, q.m_n], atol=1e-12)

    i, j = rnd.sample(range(p), 2)
    cols = list(range(p))
    cols[i], cols[j] = cols[j], cols[i]
    qc = quartet(DataMatrix(values[:, cols]))
    npt.assert_allclose([qc.s_n, qc.l_n, qc.t_n, qc.m_n], [q.s_n, q.l_n, q.t_n, q.m_n], atol=1e-12)
