import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idfactor.errors import ConvergenceError, DimensionError, FormatError
from idfactor.linalg import (
    GramStats,
    gram_deviation_bound,
    gram_stats,
    inner,
    norm_bound_entries,
    norm_bound_gram,
    operator_norm,
    read_matrix,
    write_matrix,
)

SLACK = 1e-9


def exact_norm(a):
    """Independent oracle: largest singular value via LAPACK SVD."""
    return float(np.linalg.svd(np.atleast_2d(a), compute_uv=False)[0])


class TestInner:
    def test_orthogonal_basis(self):
        assert inner([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_direct_arithmetic(self):
        assert inner([1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_against_fsum_oracle(self):
        rng = np.random.default_rng(11235)
        for _ in range(50):
            x = rng.standard_normal(8)
            y = rng.standard_normal(8)
            oracle = math.fsum(float(a) * float(b) for a, b in zip(x, y))
            assert abs(inner(x, y) - oracle) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            inner([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_cauchy_schwarz(dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    y = rng.standard_normal(dim)
    assert abs(inner(x, y)) <= np.linalg.norm(x) * np.linalg.norm(y) + 1e-12


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(5)) == pytest.approx(1.0, abs=1e-12)

    def test_diagonal(self):
        assert operator_norm(np.diag([1.0, 0.5, 0.5])) == pytest.approx(
            1.0, abs=1e-12)

    def test_zero_matrix(self):
        assert operator_norm(np.zeros((3, 4))) == 0.0

    def test_two_sided_oracle_random(self):
        rng = np.random.default_rng(66)
        a = rng.standard_normal((6, 6))
        got = operator_norm(a, rel_tol=1e-10)
        # two-sided check against the Gram eigenvalue oracle
        gram_oracle = float(np.sqrt(np.linalg.eigvalsh(a.T @ a)[-1]))
        assert got == pytest.approx(gram_oracle, rel=1e-8)
        # lower-bound check: maximizing ||Ax|| over many random unit x
        x = rng.standard_normal((6, 10**6))
        x /= np.linalg.norm(x, axis=0)
        sampled = float(np.linalg.norm(a @ x, axis=0).max())
        assert got >= sampled - SLACK

    def test_transpose_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.standard_normal((rng.integers(2, 9), rng.integers(2, 9)))
            assert operator_norm(a) == pytest.approx(operator_norm(a.T),
                                                     rel=2e-10, abs=1e-12)

    def test_submultiplicative(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = rng.standard_normal((5, 7))
            b = rng.standard_normal((7, 4))
            assert operator_norm(a @ b) <= \
                operator_norm(a) * operator_norm(b) + SLACK

    def test_dominates_every_column(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((8, 5))
        nrm = operator_norm(a)
        for j in range(5):
            assert nrm >= np.linalg.norm(a[:, j]) - SLACK

    def test_nonconvergence_budget(self):
        from idfactor.linalg import power_norm

        # eigenvalues too close to separate within the iteration budget
        slow = np.diag([1.0, 0.999])
        with pytest.raises(ConvergenceError):
            power_norm(lambda x: slow @ x, 2, rel_tol=1e-16, max_iter=3)

    def test_nonfinite_rejected(self):
        bad = np.full((3, 3), np.nan)
        with pytest.raises(ValueError):
            operator_norm(bad)


class TestNormBounds:
    def test_gram_bound_identity(self):
        assert norm_bound_gram(np.eye(3)) == pytest.approx(1.0)

    def test_gram_bound_all_ones(self):
        # rank-one case: the bound is attained exactly
        a = np.ones((2, 2))
        assert norm_bound_gram(a) == pytest.approx(2.0)
        assert exact_norm(a) == pytest.approx(2.0)

    def test_entries_bound_identity(self):
        assert norm_bound_entries(np.eye(2)) == pytest.approx(2.0)

    def test_entries_bound_zero(self):
        assert norm_bound_entries(np.zeros((3, 5))) == 0.0

    def test_gram_bound_dominates_unit_columns(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            a = rng.standard_normal((10, 10))
            a /= np.linalg.norm(a, axis=0)
            assert norm_bound_gram(a) >= exact_norm(a) - SLACK

    def test_entries_bound_dominates(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            a = rng.standard_normal((7, 3))
            assert norm_bound_entries(a) >= exact_norm(a) - SLACK


class TestGramDeviation:
    def test_orthonormal_columns(self):
        q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((6, 3)))
        assert gram_deviation_bound(q) == pytest.approx(0.0, abs=1e-12)
        assert exact_norm(q.T @ q - np.eye(3)) == pytest.approx(0.0, abs=1e-12)

    def test_duplicated_basis_column(self):
        a = np.zeros((2, 2))
        a[0, 0] = a[0, 1] = 1.0
        assert gram_deviation_bound(a) == pytest.approx(2.0)
        assert exact_norm(a.T @ a - np.eye(2)) == pytest.approx(1.0)

    def test_dominates_exact_deviation(self):
        rng = np.random.default_rng(15)
        for _ in range(500):
            a = rng.standard_normal((8, 3)) / np.sqrt(8)
            exact = exact_norm(a.T @ a - np.eye(3))
            assert gram_deviation_bound(a) >= exact - SLACK


class TestGramStats:
    def test_identity(self):
        s = gram_stats(np.eye(4))
        assert s == GramStats(capital_lambda=1.0, small_lambda=0.0,
                              max_entry=1.0, delta_dev=0.0, theta=1.0)

    def test_duplicated_column(self):
        a = np.zeros((2, 2))
        a[0, 0] = a[0, 1] = 1.0
        assert gram_stats(a).small_lambda == pytest.approx(1.0)

    def test_against_double_loop_oracle(self):
        rng = np.random.default_rng(16)
        a = rng.standard_normal((6, 6))
        s = gram_stats(a)
        norms = [math.sqrt(math.fsum(v * v for v in a[:, j]))
                 for j in range(6)]
        off = max(abs(math.fsum(a[k, i] * a[k, j] for k in range(6)))
                  for i in range(6) for j in range(6) if i != j)
        assert s.capital_lambda == pytest.approx(max(norms), abs=1e-12)
        assert s.theta == pytest.approx(min(norms), abs=1e-12)
        assert s.small_lambda == pytest.approx(off, abs=1e-12)
        assert s.max_entry == pytest.approx(abs(a).max(), abs=1e-15)
        assert s.delta_dev == pytest.approx(
            max(abs(n**2 - 1.0) for n in norms), abs=1e-12)

    def test_column_subset(self):
        a = np.diag([1.0, 0.5, 0.25])
        s = gram_stats(a, cols=[1, 2])
        assert s.theta == pytest.approx(0.25)
        assert s.capital_lambda == pytest.approx(0.5)

    def test_empty_subset_rejected(self):
        with pytest.raises(DimensionError):
            gram_stats(np.eye(3), cols=[])


class TestMatrixFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        a = rng.standard_normal((5, 3))
        f = tmp_path / "m.txt"
        write_matrix(a, f)
        assert np.array_equal(read_matrix(f), a)

    def test_rejects_nan(self, tmp_path):
        f = tmp_path / "m.txt"
        f.write_text("1 2\n1.0 nan\n")
        with pytest.raises(FormatError):
            read_matrix(f)

    def test_rejects_bad_shape(self, tmp_path):
        f = tmp_path / "m.txt"
        f.write_text("2 2\n1.0 2.0\n3.0\n")
        with pytest.raises(FormatError) as err:
            read_matrix(f)
        assert err.value.line == 3
