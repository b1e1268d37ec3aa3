"""Piecewise-linear matrix paths with exact per-segment certification.

A path is a continuous matrix function on a compact interval, represented by
strictly increasing breakpoints and one frame per breakpoint, interpolated
affinely in between.  On each segment every column inner product
``<a_i(t), a_j(t)>`` and every squared column norm is a quadratic in ``t``,
so the strict inequalities needed by the factorization drivers are certified
exactly (endpoint and vertex evaluation), never by sampling.

Algorithms downstream only touch paths through a small column-access
protocol (``col``, ``col_dot``, ``col_quads``, ``inner_all``, ``frame_norm``,
...), so a path need not hold dense frames: :class:`MatrixPath` does, while
structured generators can supply the same protocol lazily at sizes where
dense frames would not fit in memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError
from .linalg import format_real, operator_norm

__all__ = [
    "MatrixPath",
    "SegmentExtrema",
    "segment_inner_extrema",
    "segment_min_colnorm",
    "path_theta",
    "path_norm_bound",
    "parse_path",
    "write_path",
    "parse_path_text",
]


@dataclass(frozen=True)
class SegmentExtrema:
    """Exact (min, max) of a quadratic over a closed parameter range."""

    lo: float
    hi: float


def _quad_range(c0: float, c1: float, c2: float, s_lo: float,
                s_hi: float) -> SegmentExtrema:
    """Exact range of ``c0 + c1 s + c2 s^2`` over ``[s_lo, s_hi]``."""
    values = [c0 + c1 * s_lo + c2 * s_lo**2, c0 + c1 * s_hi + c2 * s_hi**2]
    if c2 != 0.0:
        s_star = -c1 / (2.0 * c2)
        if s_lo < s_star < s_hi:
            values.append(c0 + c1 * s_star + c2 * s_star**2)
    return SegmentExtrema(lo=float(min(values)), hi=float(max(values)))


class PathBase:
    """Shared protocol plumbing; concrete paths supply column access."""

    breakpoints: np.ndarray

    @property
    def num_segments(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def segment_of(self, t: float):
        """Containing segment index and local parameter ``s`` in [0, 1]."""
        a, b = self.domain
        if not a <= t <= b:
            raise DimensionError(f"t={t!r} outside domain [{a!r}, {b!r}]")
        k = int(np.searchsorted(self.breakpoints, t, side="right") - 1)
        k = min(max(k, 0), self.num_segments - 1)
        t0, t1 = self.breakpoints[k], self.breakpoints[k + 1]
        return k, float((t - t0) / (t1 - t0))

    def col_at(self, t: float, j: int) -> np.ndarray:
        k, s = self.segment_of(t)
        if s == 0.0:
            return self.col(k, j)
        if s == 1.0:
            return self.col(k + 1, j)
        return (1.0 - s) * self.col(k, j) + s * self.col(k + 1, j)

    def colnorm_at(self, t: float, j: int) -> float:
        k, s = self.segment_of(t)
        q0 = self.col_dot(k, j, k, j)
        qc = self.col_dot(k, j, k + 1, j)
        q1 = self.col_dot(k + 1, j, k + 1, j)
        val = (1 - s) ** 2 * q0 + 2 * s * (1 - s) * qc + s**2 * q1
        return float(np.sqrt(max(val, 0.0)))

    def eval(self, t: float) -> np.ndarray:
        """Dense interpolated frame at ``t``; breakpoint values are exact."""
        k, s = self.segment_of(t)
        if s == 0.0:
            return self.frame(k)
        if s == 1.0:
            return self.frame(k + 1)
        return (1.0 - s) * self.frame(k) + s * self.frame(k + 1)

    # -- protocol methods provided by subclasses -------------------------
    def frame(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def col(self, k: int, j: int) -> np.ndarray:
        raise NotImplementedError

    def col_dot(self, k1: int, i: int, k2: int, j: int) -> float:
        raise NotImplementedError

    def col_quads(self, k: int):
        """Per-column quadratic data for segment ``k``: arrays of
        ``||a_j^k||^2``, ``<a_j^k, a_j^{k+1}>`` and ``||a_j^{k+1}||^2``."""
        raise NotImplementedError

    def inner_all(self, t: float, i: int) -> np.ndarray:
        """All inner products ``<a_i(t), a_j(t)>`` as a length-N vector."""
        raise NotImplementedError

    def frame_norm(self, k: int, rel_tol: float = 1e-10) -> float:
        raise NotImplementedError


class MatrixPath(PathBase):
    """Dense piecewise-linear path: ``K+1`` frames of identical square shape
    at strictly increasing breakpoints."""

    def __init__(self, breakpoints, frames):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise DimensionError("need at least two breakpoints")
        if not np.isfinite(bp).all():
            raise FormatError("non-finite breakpoint")
        if np.any(np.diff(bp) <= 0):
            raise FormatError("breakpoints must be strictly increasing")
        fr = np.asarray(frames, dtype=float)
        if fr.ndim != 3 or fr.shape[0] != bp.size:
            raise DimensionError(
                f"expected {bp.size} frames, got array of shape {fr.shape}"
            )
        if fr.shape[1] != fr.shape[2]:
            raise DimensionError("frames must be square")
        if not np.isfinite(fr).all():
            raise FormatError("non-finite frame entry")
        self.breakpoints = bp
        self.frames = fr

    @property
    def N(self) -> int:
        return self.frames.shape[1]

    def frame(self, k: int) -> np.ndarray:
        return self.frames[k]

    def col(self, k: int, j: int) -> np.ndarray:
        return self.frames[k][:, j]

    def col_dot(self, k1, i, k2, j) -> float:
        return float(self.frames[k1][:, i] @ self.frames[k2][:, j])

    def col_quads(self, k: int):
        a, b = self.frames[k], self.frames[k + 1]
        q0 = np.einsum("ij,ij->j", a, a)
        qc = np.einsum("ij,ij->j", a, b)
        q1 = np.einsum("ij,ij->j", b, b)
        return q0, qc, q1

    def inner_all(self, t: float, i: int) -> np.ndarray:
        k, s = self.segment_of(t)
        x = self.col_at(t, i)
        if s == 0.0:
            return self.frames[k].T @ x
        if s == 1.0:
            return self.frames[k + 1].T @ x
        return (1.0 - s) * (self.frames[k].T @ x) + s * (self.frames[k + 1].T @ x)

    def frame_norm(self, k: int, rel_tol: float = 1e-10) -> float:
        return operator_norm(self.frames[k], rel_tol)


def _check_segment(path: PathBase, seg: int) -> None:
    if not 0 <= seg < path.num_segments:
        raise DimensionError(
            f"segment {seg} out of range [0, {path.num_segments})"
        )


def _check_col(path: PathBase, j: int) -> None:
    if not 0 <= j < path.N:
        raise DimensionError(f"column {j} out of range [0, {path.N})")


def segment_inner_extrema(path: PathBase, seg: int, i: int, j: int,
                          s_lo: float = 0.0, s_hi: float = 1.0) -> SegmentExtrema:
    """Exact min/max of ``<a_i(t), a_j(t)>`` over (a sub-range of) a segment.

    The product is a quadratic in the local parameter, so extrema occur at
    the range endpoints or the single interior critical point.
    """
    _check_segment(path, seg)
    _check_col(path, i)
    _check_col(path, j)
    d00 = path.col_dot(seg, i, seg, j)
    d01 = path.col_dot(seg, i, seg + 1, j)
    d10 = path.col_dot(seg + 1, i, seg, j)
    d11 = path.col_dot(seg + 1, i, seg + 1, j)
    c0 = d00
    c1 = d01 + d10 - 2.0 * d00
    c2 = d11 - d01 - d10 + d00
    return _quad_range(c0, c1, c2, s_lo, s_hi)


def segment_min_colnorm(path: PathBase, seg: int, i: int,
                        s_lo: float = 0.0, s_hi: float = 1.0) -> float:
    """Exact minimum of ``||a_i(t)||`` over (a sub-range of) a segment."""
    _check_segment(path, seg)
    _check_col(path, i)
    q0 = path.col_dot(seg, i, seg, i)
    qc = path.col_dot(seg, i, seg + 1, i)
    q1 = path.col_dot(seg + 1, i, seg + 1, i)
    c0, c1, c2 = q0, 2.0 * (qc - q0), q1 - 2.0 * qc + q0
    rng = _quad_range(c0, c1, c2, s_lo, s_hi)
    return float(np.sqrt(max(rng.lo, 0.0)))


def path_theta(path: PathBase) -> float:
    """Exact infimum of column norms over the whole domain (0 when some
    column vanishes somewhere)."""
    best = np.inf
    for k in range(path.num_segments):
        q0, qc, q1 = path.col_quads(k)
        c1 = 2.0 * (qc - q0)
        c2 = q1 - 2.0 * qc + q0
        vals = np.minimum(q0, q1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s_star = np.where(c2 > 0, -c1 / (2.0 * c2), -1.0)
        interior = (s_star > 0) & (s_star < 1)
        if interior.any():
            s = s_star[interior]
            v = q0[interior] + c1[interior] * s + c2[interior] * s**2
            vals[interior] = np.minimum(vals[interior], v)
        best = min(best, float(vals.min()))
    return float(np.sqrt(max(best, 0.0)))


def path_norm_bound(path: PathBase, rel_tol: float = 1e-10) -> float:
    """Global bound on ``||A(t)||``: the max over breakpoint frames, valid
    because the operator norm is convex along affine segments."""
    return max(path.frame_norm(k, rel_tol)
               for k in range(path.num_segments + 1))


def write_path(path: MatrixPath, file_path) -> None:
    """Text format: ``N K`` header, the K+1 breakpoints, then K+1 frame
    blocks separated by blank lines; bit-exact round trip."""
    from .linalg import _atomic_write

    n, k = path.N, path.num_segments
    chunks = [f"{n} {k}", " ".join(format_real(t) for t in path.breakpoints)]
    for m in range(k + 1):
        block = "\n".join(
            " ".join(format_real(v) for v in row) for row in path.frames[m]
        )
        chunks.append("")
        chunks.append(block)
    _atomic_write(file_path, "\n".join(chunks) + "\n")


def parse_path(file_path) -> MatrixPath:
    with open(file_path, "r", encoding="ascii") as fh:
        return parse_path_text(fh.read())


def parse_path_text(text: str) -> MatrixPath:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty path file", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise FormatError("header must be 'N K'", line=1)
    try:
        n, k = int(header[0]), int(header[1])
    except ValueError as exc:
        raise FormatError(f"bad header: {exc}", line=1) from None
    if n < 1 or k < 1:
        raise FormatError("need N >= 1 and K >= 1", line=1)
    if len(lines) < 2:
        raise FormatError("missing breakpoint line", line=2)
    try:
        bp = np.array([float(p) for p in lines[1].split()])
    except ValueError as exc:
        raise FormatError(str(exc), line=2) from None
    if bp.size != k + 1:
        raise FormatError(f"expected {k + 1} breakpoints, found {bp.size}",
                          line=2)
    if not np.isfinite(bp).all():
        raise FormatError("non-finite breakpoint", line=2)
    if np.any(np.diff(bp) <= 0):
        bad = int(np.flatnonzero(np.diff(bp) <= 0)[0])
        raise FormatError(
            f"breakpoints not strictly increasing at position {bad + 1}",
            line=2,
        )
    frames = np.empty((k + 1, n, n))
    cursor = 2
    for m in range(k + 1):
        while cursor < len(lines) and not lines[cursor].strip():
            cursor += 1
        if cursor + n > len(lines):
            raise FormatError(f"frame {m} truncated", line=len(lines))
        for r in range(n):
            parts = lines[cursor + r].split()
            if len(parts) != n:
                raise FormatError(
                    f"frame {m} row {r}: expected {n} entries, found "
                    f"{len(parts)}",
                    line=cursor + r + 1,
                )
            try:
                frames[m, r] = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(str(exc), line=cursor + r + 1) from None
            if not np.isfinite(frames[m, r]).all():
                raise FormatError("non-finite entry", line=cursor + r + 1)
        cursor += n
    while cursor < len(lines):
        if lines[cursor].strip():
            raise FormatError("trailing content after last frame",
                              line=cursor + 1)
        cursor += 1
    return MatrixPath(bp, frames)
