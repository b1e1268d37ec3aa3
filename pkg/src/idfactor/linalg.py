"""Dense real vector/matrix arithmetic, operator norms, and Gram-based bounds.

Vectors and matrices are plain ``numpy.float64`` arrays.  Column indices are
0-based everywhere in this package, including the text formats.

The operator norm is computed by power iteration on the smaller of the two
Gram forms (``A^T A`` or ``A A^T``), never materializing the Gram matrix for
large operands.  The three closed-form upper bounds (``norm_bound_gram``,
``norm_bound_entries``, ``gram_deviation_bound``) are cheap certificates that
dominate the exact norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, FormatError

__all__ = [
    "GramStats",
    "inner",
    "operator_norm",
    "power_norm",
    "norm_bound_gram",
    "norm_bound_entries",
    "gram_deviation_bound",
    "gram_stats",
    "read_matrix",
    "write_matrix",
    "format_real",
]

DEFAULT_REL_TOL = 1e-10
MAX_POWER_ITERATIONS = 10_000

# Above this dimension the Gram matrix is applied as two mat-vec passes
# instead of being formed explicitly.
_FORM_GRAM_LIMIT = 512


@dataclass(frozen=True)
class GramStats:
    """The five column statistics of a matrix (or a subset of its columns).

    capital_lambda -- max column norm
    small_lambda   -- max absolute off-diagonal column inner product
    max_entry      -- max absolute entry
    delta_dev      -- max deviation of a squared column norm from 1
    theta          -- min column norm
    """

    capital_lambda: float
    small_lambda: float
    max_entry: float
    delta_dev: float
    theta: float


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    return v


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def inner(x, y) -> float:
    """Euclidean inner product of two equal-length vectors."""
    xv, yv = _as_vector(x), _as_vector(y)
    if xv.shape != yv.shape:
        raise DimensionError(f"length mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    return float(xv @ yv)


def _start_vector(dim: int) -> np.ndarray:
    # All-ones plus a fixed aperiodic perturbation; never orthogonal to a
    # coordinate-sparse dominant eigenvector by accident.
    return 1.0 + 1e-3 * np.cos(0.7 * np.arange(dim) + 0.3)


def power_norm(apply_gram, dim: int, rel_tol: float = DEFAULT_REL_TOL,
               max_iter: int = MAX_POWER_ITERATIONS) -> float:
    """Largest eigenvalue square root of a symmetric PSD operator.

    ``apply_gram`` maps a vector to ``G @ x`` for the PSD Gram operator G.
    Convergence is declared when the Rayleigh-quotient residual
    ``||Gx - rho x||`` drops below ``rel_tol * rho``, or when the Rayleigh
    quotient stagnates below a tenth of that (exactly degenerate or tightly
    clustered top eigenvalues converge in value long before the residual
    clears).
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    x = _start_vector(dim)
    x /= np.linalg.norm(x)
    rho_prev = None
    for _ in range(max_iter):
        y = apply_gram(x)
        rho = float(x @ y)
        ynorm = float(np.linalg.norm(y))
        if not np.isfinite(rho) or not np.isfinite(ynorm):
            raise ValueError("operator produced non-finite values")
        if ynorm == 0.0:
            return 0.0
        scale = max(rho, 1e-300)
        residual = float(np.linalg.norm(y - rho * x))
        if residual <= rel_tol * scale:
            return float(np.sqrt(max(rho, 0.0)))
        if rho_prev is not None and abs(rho - rho_prev) <= 0.1 * rel_tol * scale:
            return float(np.sqrt(max(rho, 0.0)))
        rho_prev = rho
        x = y / ynorm
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(rel_tol={rel_tol:g}); input may be degenerate"
    )


def operator_norm(a, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Largest singular value of ``a`` within relative error ``rel_tol``.

    Non-finite entries surface as an immediate error from the first
    iteration (a full pre-scan would cost a pass over the matrix).
    """
    m = _as_matrix(a)
    rows, cols = m.shape
    if cols <= rows:
        if cols <= _FORM_GRAM_LIMIT:
            gram = m.T @ m
            return power_norm(lambda x: gram @ x, cols, rel_tol)
        return power_norm(lambda x: m.T @ (m @ x), cols, rel_tol)
    if rows <= _FORM_GRAM_LIMIT:
        gram = m @ m.T
        return power_norm(lambda x: gram @ x, rows, rel_tol)
    return power_norm(lambda x: m @ (m.T @ x), rows, rel_tol)


def gram_stats(a, cols=None) -> GramStats:
    """Column statistics over ``cols`` (an index sequence) or all columns."""
    m = _as_matrix(a)
    if cols is None:
        sub = m
    else:
        idx = np.asarray(cols, dtype=int)
        if idx.size == 0:
            raise DimensionError("empty column set")
        if idx.min() < 0 or idx.max() >= m.shape[1]:
            raise DimensionError("column index out of range")
        sub = m[:, idx]
    norms = np.linalg.norm(sub, axis=0)
    gram = sub.T @ sub
    off = gram - np.diag(np.diag(gram))
    n = sub.shape[1]
    small_lambda = float(np.abs(off).max()) if n > 1 else 0.0
    return GramStats(
        capital_lambda=float(norms.max()),
        small_lambda=small_lambda,
        max_entry=float(np.abs(sub).max()),
        delta_dev=float(np.abs(norms**2 - 1.0).max()),
        theta=float(norms.min()),
    )


def norm_bound_gram(a) -> float:
    """Upper bound ``(Lambda^2 + (n-1) lambda)^(1/2)`` on the operator norm."""
    m = _as_matrix(a)
    s = gram_stats(m)
    n = m.shape[1]
    return float(np.sqrt(s.capital_lambda**2 + (n - 1) * s.small_lambda))


def norm_bound_entries(a) -> float:
    """Upper bound ``d * sqrt(m * n)`` on the operator norm."""
    m = _as_matrix(a)
    d = float(np.abs(m).max())
    return d * float(np.sqrt(m.shape[0] * m.shape[1]))


def gram_deviation_bound(a) -> float:
    """Upper bound ``n * max(lambda, Delta)`` on ``||A^T A - I_n||``."""
    m = _as_matrix(a)
    s = gram_stats(m)
    return m.shape[1] * max(s.small_lambda, s.delta_dev)


def format_real(x: float) -> str:
    """Decimal text that round-trips float64 exactly."""
    return format(float(x), ".17g")


def write_matrix(a, path) -> None:
    """Write a matrix in the repo-wide text format: header ``rows cols``,
    then one whitespace-separated row per line."""
    m = _as_matrix(a)
    rows, cols = m.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(format_real(v) for v in m[r]))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    """Parse the matrix text format; rejects NaN/Inf and shape mismatches."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise FormatError("empty matrix file", line=1)
    header = raw[0].split()
    if len(header) != 2:
        raise FormatError("header must be 'rows cols'", line=1)
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError as exc:
        raise FormatError(f"bad header: {exc}", line=1) from None
    if rows < 1 or cols < 1:
        raise FormatError("dimensions must be positive", line=1)
    if len(raw) < rows + 1:
        raise FormatError(f"expected {rows} data rows, found {len(raw) - 1}",
                          line=len(raw))
    out = np.empty((rows, cols))
    for r in range(rows):
        parts = raw[r + 1].split()
        if len(parts) != cols:
            raise FormatError(f"expected {cols} entries, found {len(parts)}",
                              line=r + 2)
        try:
            out[r] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(str(exc), line=r + 2) from None
        if not np.isfinite(out[r]).all():
            raise FormatError("non-finite entry", line=r + 2)
    return out


def _atomic_write(path, text: str) -> None:
    import os

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(text)
    os.replace(tmp, path)
