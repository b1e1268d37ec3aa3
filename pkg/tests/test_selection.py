import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idfactor.errors import DimensionError, ExhaustionError, InfeasibleError
from idfactor.linalg import operator_norm
from idfactor.selection import (
    big_inner_set,
    select_almost_orthogonal,
    select_disjoint_extension,
)


def brute_force_big_set(a, i, eps):
    """Oracle: scan every inner product with plain Python sums."""
    n = a.shape[1]
    out = []
    for j in range(n):
        if abs(float(a[:, i] @ a[:, j])) >= eps:
            out.append(j)
    return out


def normalized(rng, n, m=None):
    a = rng.standard_normal((m or n, n))
    return a / np.linalg.svd(a, compute_uv=False)[0]


class TestBigInnerSet:
    def test_identity_columns(self):
        assert big_inner_set(np.eye(4), 0, 0.5).tolist() == [0]

    def test_duplicated_column(self):
        a = np.zeros((2, 3))
        a[0, 0] = a[0, 1] = 1.0
        a[1, 2] = 1.0
        assert big_inner_set(a, 0, 0.5).tolist() == [0, 1]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(21)
        a = normalized(rng, 12)
        for i in range(12):
            for eps in (0.05, 0.2, 0.6):
                assert big_inner_set(a, i, eps).tolist() == \
                    brute_force_big_set(a, i, eps)

    def test_index_out_of_range(self):
        with pytest.raises(DimensionError):
            big_inner_set(np.eye(3), 3, 0.5)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.05, 0.1, 0.3]))
def test_counting_bound(seed, eps):
    # at most norm^4/eps^2 columns can correlate with any fixed column
    rng = np.random.default_rng(seed)
    a = normalized(rng, 16)
    nrm = operator_norm(a)
    cap = (nrm + 1e-9) ** 4 / eps**2
    for i in range(16):
        assert len(big_inner_set(a, i, eps)) <= cap


class TestSelectAlmostOrthogonal:
    def test_identity_prefix(self):
        # N >= n/eps^2 = 34 keeps the worst-case guard satisfied
        assert select_almost_orthogonal(np.eye(40), 3, 0.3) == (0, 1, 2)

    def test_skips_duplicate(self):
        a = np.zeros((3, 4))
        a[0, 0] = a[0, 1] = 1.0
        a[1, 2] = 1.0
        a[2, 3] = 1.0
        # column 1 duplicates column 0, greedy jumps to column 2
        assert select_almost_orthogonal(a, 2, 0.5, strict=False) == (0, 2)

    def test_single_column(self):
        assert select_almost_orthogonal(np.eye(3), 1, 0.5) == (0,)

    def test_postcondition_on_random(self):
        rng = np.random.default_rng(22)
        a = normalized(rng, 200)
        f = select_almost_orthogonal(a, 2, 0.1)
        assert len(f) == 2
        i, j = f
        assert abs(float(a[:, i] @ a[:, j])) < 0.1

    def test_determinism(self):
        rng = np.random.default_rng(23)
        a = normalized(rng, 120)
        assert select_almost_orthogonal(a, 2, 0.15) == \
            select_almost_orthogonal(a.copy(), 2, 0.15)

    def test_monotone_prefix(self):
        # the greedy family for size n starts with the family for n' < n
        rng = np.random.default_rng(24)
        a = normalized(rng, 400)
        f3 = select_almost_orthogonal(a, 3, 0.1)
        f2 = select_almost_orthogonal(a, 2, 0.1)
        assert f3[:2] == f2

    def test_infeasible_when_too_few_columns(self):
        with pytest.raises(InfeasibleError):
            select_almost_orthogonal(np.eye(10), 2, 0.1)  # needs N >= 200

    def test_infeasible_eps(self):
        with pytest.raises(InfeasibleError):
            select_almost_orthogonal(np.eye(1000), 5, 0.9)

    def test_exhaustion_reported(self):
        # all columns identical: nothing admissible after the first pick
        a = np.ones((4, 6)) / 2.0
        with pytest.raises(ExhaustionError):
            select_almost_orthogonal(a, 2, 0.2, strict=False)


class TestSelectDisjointExtension:
    def test_identity(self):
        a = np.eye(20)
        f3 = select_disjoint_extension(a, 2, 0.3, (0, 1), (2, 3))
        assert f3 == (4, 5)

    def test_collision_with_f1_neighborhood(self):
        a = np.eye(20)
        a[:, 4] = 0.0
        a[0, 4] = 1.0  # column 4 duplicates column 0 in F1
        f3 = select_disjoint_extension(a, 2, 0.3, (0, 1), (2, 3))
        assert f3 == (5, 6)

    def test_postconditions_on_random(self):
        rng = np.random.default_rng(25)
        a = normalized(rng, 300)
        f1 = select_almost_orthogonal(a, 2, 0.2)
        f2 = select_disjoint_extension(a, 2, 0.2, f1, f1, strict=False)
        f3 = select_disjoint_extension(a, 2, 0.2, f1, f2)
        assert not (set(f3) & (set(f1) | set(f2)))
        for i in f3:
            for j in set(f3) | set(f1) | set(f2):
                if i != j:
                    assert abs(float(a[:, i] @ a[:, j])) < 0.2

    def test_infeasibility(self):
        # needs N >= 5n/eps^2 = 111
        with pytest.raises(InfeasibleError):
            select_disjoint_extension(np.eye(30), 2, 0.3, (0, 1), (2, 3))

    def test_size_mismatch_rejected(self):
        with pytest.raises(InfeasibleError):
            select_disjoint_extension(np.eye(400), 2, 0.3, (0,), (2, 3))
