"""Greedy selection of almost-orthogonal column families.

``big_inner_set`` computes the set of columns whose inner product with a
fixed column is at least ``eps`` in absolute value; for a matrix of norm at
most one it has at most ``1/eps^2`` elements, which is what makes the greedy
selection below feasible.  Selection always picks the lowest admissible
index, so identical inputs give identical families.

Feasibility preconditions are the worst-case sufficient ones; passing
``strict=False`` skips them (the greedy still reports exhaustion honestly),
which is what rank-forced drivers such as the lower-bound witness use.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ExhaustionError, InfeasibleError

__all__ = [
    "big_inner_set",
    "select_almost_orthogonal",
    "select_disjoint_extension",
    "greedy_family",
]

# Counting thresholds are checked in floating point; values this close to
# the boundary are accepted.
_BOUNDARY_SLACK = 1e-9


def big_inner_set(a, i: int, eps: float) -> np.ndarray:
    """Indices ``j`` with ``|<a_i, a_j>| >= eps`` (0-based, sorted).

    May contain ``i`` itself whenever ``||a_i||^2 >= eps``.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    n_cols = m.shape[1]
    if not 0 <= i < n_cols:
        raise DimensionError(f"column index {i} out of range [0, {n_cols})")
    if eps <= 0:
        raise ValueError("eps must be positive")
    dots = m.T @ m[:, i]
    return np.flatnonzero(np.abs(dots) >= eps)


def greedy_family(dots_of, n_cols: int, size: int, eps: float,
                  banned=None, start=None):
    """Greedy core: grow a family of ``size`` column indices with all pairwise
    ``|<a_i, a_j>| < eps``.

    ``dots_of(i)`` returns the length-``n_cols`` vector of inner products of
    column ``i`` against every column.  ``banned`` is a boolean mask of
    excluded indices (mutated locally on a copy).  Picks the lowest
    admissible index at every step; raises ``ExhaustionError`` when none
    remains.
    """
    mask = np.zeros(n_cols, dtype=bool) if banned is None else banned.copy()
    chosen = []
    if start is not None:
        chosen.append(int(start))
        mask[start] = True
        mask |= np.abs(dots_of(start)) >= eps
    while len(chosen) < size:
        free = np.flatnonzero(~mask)
        if free.size == 0:
            raise ExhaustionError(
                f"no admissible column left after choosing {len(chosen)} of "
                f"{size}; preconditions were violated or relaxed"
            )
        j = int(free[0])
        chosen.append(j)
        mask[j] = True
        mask |= np.abs(dots_of(j)) >= eps
    return tuple(sorted(chosen))


def _check_eps_bound(size: int, eps: float) -> None:
    if size >= 2:
        limit = 1.0 / np.sqrt(size - 1)
        if eps >= limit + _BOUNDARY_SLACK:
            raise InfeasibleError(
                f"eps={eps:g} must be below 1/sqrt(n-1)={limit:g} for n={size}"
            )


def select_almost_orthogonal(a, size: int, eps: float, *,
                             strict: bool = True):
    """A family ``F`` of ``size`` columns with all pairwise inner products
    below ``eps`` in absolute value, for a matrix certified ``||A|| <= 1``.

    Greedy from index 0 upward.  For ``size == 1`` returns ``(0,)``.
    ``strict`` enforces the worst-case feasibility ``N >= size/eps^2``.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    n_cols = m.shape[1]
    if size < 1:
        raise ValueError("family size must be >= 1")
    if size == 1:
        return (0,)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if strict:
        _check_eps_bound(size, eps)
        need = size / eps**2
        if n_cols < need - _BOUNDARY_SLACK:
            raise InfeasibleError(
                f"N={n_cols} columns cannot guarantee a family of {size} at "
                f"eps={eps:g}; need N >= {need:g}"
            )
    dots_of = lambda i: m.T @ m[:, i]
    return greedy_family(dots_of, n_cols, size, eps, start=0)


def select_disjoint_extension(a, size: int, eps: float, f1, f2, *,
                              strict: bool = True):
    """A third family, disjoint from ``f1`` and ``f2`` and almost orthogonal
    both internally and against every column of ``f1`` and ``f2``."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    n_cols = m.shape[1]
    f1 = tuple(int(i) for i in f1)
    f2 = tuple(int(i) for i in f2)
    if strict:
        if len(f1) != size or len(f2) != size:
            raise InfeasibleError(
                f"families must both have size {size}; got {len(f1)}, {len(f2)}"
            )
        _check_eps_bound(size, eps)
        need = 5.0 * size / eps**2
        if n_cols < need - _BOUNDARY_SLACK:
            raise InfeasibleError(
                f"N={n_cols} columns cannot guarantee a disjoint extension of "
                f"{size} at eps={eps:g}; need N >= {need:g}"
            )
    if eps <= 0:
        raise ValueError("eps must be positive")
    dots_of = lambda i: m.T @ m[:, i]
    mask = np.zeros(n_cols, dtype=bool)
    for i in set(f1) | set(f2):
        if not 0 <= i < n_cols:
            raise DimensionError(f"family index {i} out of range")
        mask[i] = True
        mask |= np.abs(dots_of(i)) >= eps
    return greedy_family(dots_of, n_cols, size, eps, banned=mask)
