"""Seeded random instances and test paths whose hypotheses hold exactly.

Static instances are ``A = Q D`` with ``Q`` orthogonal and ``D`` diagonal
with entries in ``[theta, 1]``: then ``||A|| = max D <= 1`` and the column
norms are exactly the diagonal entries, so ``theta`` is attained rather than
approximated.  ``Q`` comes from full QR orthonormalization of a seeded
Gaussian matrix up to moderate size, and from block-wise orthonormalized
Gaussian blocks under row/column permutations above it (exactly orthogonal
either way, but assembled in O(N * block) instead of O(N^3)).

Paths are ``A(t) = A0 V(t)`` where ``V`` is the identity outside a small
active column block and piecewise-linear between per-frame orthogonal block
matrices inside it.  Column movement per segment is angle-bounded, which
bounds the interpolation dip of column norms below their frame values, so a
requested path theta is met exactly (one inactive column is pinned to it).
Collision events (paired small rotations through a shared helper column)
drive designated low-index column pairs above the almost-orthogonality
threshold mid-segment, forcing nontrivial covers.

:class:`OrthoDiagPath` stores only the block structure, the diagonal, and
the per-frame active blocks, so 50-segment paths at five-digit N fit in a
few tens of megabytes while supplying the exact column-access protocol of
:mod:`idfactor.paths`.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .linalg import power_norm
from .paths import MatrixPath, PathBase

__all__ = [
    "haar_orthogonal",
    "BlockOrthogonal",
    "random_instance",
    "OrthoDiagPath",
    "make_constant_path",
    "make_rotation_path",
    "make_random_path",
    "to_matrix_path",
]

_FULL_QR_LIMIT = 1024
_ACTIVE = 8
# Per-segment column movement is capped at this angle; interpolated norms
# then dip by at most a factor cos(angle/2) below the frame norms.
_EVENT_ANGLE = 0.55
_BACKGROUND_ANGLE = 0.02


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR with sign correction."""
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


class BlockOrthogonal:
    """Exactly orthogonal matrix: column-permuted block diagonal of Haar
    blocks.

    Columns are scattered across blocks by a random permutation; rows stay
    block-contiguous (a row permutation changes nothing any consumer here
    measures, and keeping rows contiguous makes dense assembly a single
    sequential pass over the output buffer).
    """

    def __init__(self, n: int, rng: np.random.Generator, block: int = 64):
        self.n = n
        block = min(block, n)
        bounds = list(range(0, n, block)) + [n]
        self.blocks = [
            haar_orthogonal(bounds[i + 1] - bounds[i], rng)
            for i in range(len(bounds) - 1)
        ]
        self.bounds = bounds
        self.col_perm = rng.permutation(n)
        self._col_pos = np.argsort(self.col_perm)

    def col(self, j: int) -> np.ndarray:
        """Dense column ``j`` (unit norm)."""
        pos = self._col_pos[j]
        b = int(np.searchsorted(self.bounds, pos, side="right") - 1)
        lo, hi = self.bounds[b], self.bounds[b + 1]
        out = np.zeros(self.n)
        out[lo:hi] = self.blocks[b][:, pos - lo]
        return out

    def dense(self, out: np.ndarray | None = None,
              col_scale: np.ndarray | None = None) -> np.ndarray:
        """Materialize, optionally scaling column ``j`` by ``col_scale[j]``.

        ``out`` lets callers recycle the (n, n) buffer: fresh half-gigabyte
        allocations pay a page-fault pass per instance otherwise.
        """
        target = np.zeros((self.n, self.n)) if out is None else out
        if out is not None:
            target[:] = 0.0
        for b in range(len(self.blocks)):
            lo, hi = self.bounds[b], self.bounds[b + 1]
            cols = self.col_perm[lo:hi]
            block = self.blocks[b]
            if col_scale is not None:
                block = block * col_scale[cols]
            target[lo:hi, cols] = block
        return target


def _instance_diag(n: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """Diagonal in [theta, 1] with max exactly 1 (index 0), min exactly
    theta (last index), and the rest packed near theta so the top singular
    value is well separated (keeps the norm check cheap)."""
    d = theta + 0.05 * (1.0 - theta) * rng.random(n)
    d[0] = 1.0
    d[-1] = theta
    return d


def random_instance(n_cols: int, theta: float, seed,
                    out: np.ndarray | None = None) -> np.ndarray:
    """Dense seeded ``A = Q D`` with ``||A|| = 1`` and min column norm
    exactly ``theta``.  Pass ``out`` to recycle the (n, n) buffer."""
    if not 0 < theta <= 1:
        raise DimensionError(f"theta={theta:g} must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    d = _instance_diag(n_cols, theta, rng)
    if n_cols <= _FULL_QR_LIMIT:
        a = haar_orthogonal(n_cols, rng)
        a *= d
        if out is not None:
            out[:] = a
            a = out
        return a
    return BlockOrthogonal(n_cols, rng).dense(out=out, col_scale=d)


class OrthoDiagPath(PathBase):
    """Piecewise-linear path ``A(t) = Q diag(d) V(t)`` with ``V`` equal to
    the identity outside a small active column block.

    ``w_frames[k]`` is the orthogonal active-block restriction of the k-th
    frame's ``V``.  All protocol queries reduce to ``d``-weighted dots of
    the small ``V`` columns, since ``(Q D u) . (Q D v) = u . D^2 v``.
    """

    def __init__(self, q: BlockOrthogonal, d, act, w_frames, breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise DimensionError("breakpoints must be strictly increasing")
        w = np.asarray(w_frames, dtype=float)
        act = np.asarray(act, dtype=int)
        if w.shape != (bp.size, act.size, act.size):
            raise DimensionError(
                f"expected {bp.size} active blocks of size {act.size}, got "
                f"{w.shape}"
            )
        self.q = q
        self.d = np.asarray(d, dtype=float)
        self.act = act
        self._loc = {int(j): l for l, j in enumerate(act)}
        self.w_frames = w
        self.breakpoints = bp
        self._d2_act = self.d[act] ** 2

    @property
    def N(self) -> int:
        return self.q.n

    def _vcol(self, k: int, j: int):
        """Column j of frame k's V restricted to the active block, or None
        when the column is inactive (V column = e_j)."""
        loc = self._loc.get(int(j))
        if loc is None:
            return None
        return self.w_frames[k][:, loc]

    def col(self, k: int, j: int) -> np.ndarray:
        v = self._vcol(k, j)
        if v is None:
            return self.d[j] * self.q.col(j)
        out = np.zeros(self.N)
        for l, idx in enumerate(self.act):
            if v[l] != 0.0:
                out += (v[l] * self.d[idx]) * self.q.col(idx)
        return out

    def col_dot(self, k1: int, i: int, k2: int, j: int) -> float:
        vi = self._vcol(k1, i)
        vj = self._vcol(k2, j)
        if vi is None and vj is None:
            return float(self.d[i] ** 2) if i == j else 0.0
        # An inactive column is a coordinate vector outside the active set,
        # so its D^2-weighted dot against any active-block column vanishes.
        if vi is None or vj is None:
            return 0.0
        return float(vi @ (self._d2_act * vj))

    def col_quads(self, k: int):
        d2 = self.d**2
        q0 = d2.copy()
        qc = d2.copy()
        q1 = d2.copy()
        wk, wk1 = self.w_frames[k], self.w_frames[k + 1]
        q0[self.act] = np.einsum("lc,l,lc->c", wk, self._d2_act, wk)
        qc[self.act] = np.einsum("lc,l,lc->c", wk, self._d2_act, wk1)
        q1[self.act] = np.einsum("lc,l,lc->c", wk1, self._d2_act, wk1)
        return q0, qc, q1

    def inner_all(self, t: float, i: int) -> np.ndarray:
        k, s = self.segment_of(t)
        wt = (1.0 - s) * self.w_frames[k] + s * self.w_frames[k + 1]
        out = np.zeros(self.N)
        loc = self._loc.get(int(i))
        if loc is None:
            out[i] = self.d[i] ** 2
            return out
        z_act = self._d2_act * wt[:, loc]
        out[self.act] = wt.T @ z_act
        return out

    def frame_norm(self, k: int, rel_tol: float = 1e-10) -> float:
        d2 = self.d**2
        w = self.w_frames[k]
        act = self.act
        d2_act = self._d2_act

        def apply(x):
            y = d2 * x
            xa = w @ x[act]
            y[act] = w.T @ (d2_act * xa)
            return y

        return power_norm(apply, self.N, rel_tol)

    def frame(self, k: int) -> np.ndarray:
        cols = [self.col(k, j) for j in range(self.N)]
        return np.stack(cols, axis=1)


def to_matrix_path(path: OrthoDiagPath) -> MatrixPath:
    """Densify a structured path (small N only)."""
    frames = np.stack([path.frame(k) for k in range(path.num_segments + 1)])
    return MatrixPath(path.breakpoints, frames)


def _path_diag(n: int, theta: float, act, rng: np.random.Generator) -> np.ndarray:
    """Active columns get norm 1; inactive norms are constant in t, spread
    over [theta, theta + 0.05 (1 - theta)] with the minimum pinned exactly
    at theta on the last column."""
    d = theta + 0.05 * (1.0 - theta) * rng.random(n)
    d[act] = 1.0
    d[-1] = theta
    return d


def _rotation(p: int, i: int, j: int, beta: float) -> np.ndarray:
    g = np.eye(p)
    c, s = np.cos(beta), np.sin(beta)
    g[i, i] = c
    g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g


def _event_step(p: int, f0: int, f1: int, helper: int, beta: float) -> np.ndarray:
    """Two rotations through a shared helper column.  The composed step has
    a symmetric off-diagonal component on (f0, f1), so the interpolated
    inner product of those columns peaks near sin(beta)^2 / 4 mid-segment
    while every column moves by less than 2 * beta."""
    return _rotation(p, helper, f0, beta) @ _rotation(p, helper, f1, beta)


def make_constant_path(n_cols: int, theta: float, segments: int, seed,
                       span=(0.0, 1.0)) -> OrthoDiagPath:
    """Constant path (all frames equal); the only paths with theta = 1."""
    rng = np.random.default_rng(seed)
    q = BlockOrthogonal(n_cols, rng)
    act = np.arange(min(_ACTIVE, n_cols))
    d = _path_diag(n_cols, theta, act, rng)
    w = np.broadcast_to(np.eye(act.size), (segments + 1, act.size, act.size))
    bp = np.linspace(span[0], span[1], segments + 1)
    return OrthoDiagPath(q, d, act, np.array(w), bp)


def make_rotation_path(n_cols: int, theta: float, segments: int, seed,
                       angle: float = 0.1, span=(0.0, 1.0)) -> OrthoDiagPath:
    """Frames drift by one small active-pair Givens rotation per segment.

    Plane rotations keep interpolated columns exactly orthogonal (the
    antisymmetric cross terms cancel), so covers stay single-interval; only
    the norm dip is exercised.
    """
    rng = np.random.default_rng(seed)
    q = BlockOrthogonal(n_cols, rng)
    p = min(_ACTIVE, n_cols)
    act = np.arange(p)
    d = _path_diag(n_cols, theta, act, rng)
    w = np.empty((segments + 1, p, p))
    w[0] = np.eye(p)
    for k in range(segments):
        i, j = rng.choice(p, size=2, replace=False)
        beta = angle * (2.0 * rng.random() - 1.0)
        w[k + 1] = w[k] @ _rotation(p, int(i), int(j), beta)
    bp = np.linspace(span[0], span[1], segments + 1)
    return OrthoDiagPath(q, d, act, w, bp)


def make_random_path(n_cols: int, theta: float, segments: int, seed,
                     events: int | None = None,
                     span=(0.0, 1.0)) -> OrthoDiagPath:
    """Random normalized path with seeded collision events.

    Background segments apply tiny paired rotations (interpolated inner
    products stay near zero); event segments apply the same shape at
    ``_EVENT_ANGLE``, pushing one designated low-index column pair well above
    typical almost-orthogonality thresholds mid-segment.
    """
    if n_cols < _ACTIVE + 2:
        raise DimensionError(f"need at least {_ACTIVE + 2} columns")
    rng = np.random.default_rng(seed)
    q = BlockOrthogonal(n_cols, rng)
    p = _ACTIVE
    act = np.arange(p)
    d = _path_diag(n_cols, theta, act, rng)
    if events is None:
        events = max(segments // 8, 1)
    event_gap = max(segments // (events + 1), 1)
    event_segments = {event_gap * (e + 1): e for e in range(events)}
    # Alternate the colliding pair so each event hits the family the greedy
    # selector is currently using ({0,1} and {0,2} alternate).
    pair_cycle = [(0, 1), (0, 2)]
    helper = p - 2

    w = np.empty((segments + 1, p, p))
    w[0] = np.eye(p)
    for k in range(segments):
        if k in event_segments:
            f0, f1 = pair_cycle[event_segments[k] % len(pair_cycle)]
            step = _event_step(p, f0, f1, helper, _EVENT_ANGLE)
        else:
            i, j = rng.choice(p - 1, size=2, replace=False)
            step = _event_step(p, int(i), int(j), p - 1, _BACKGROUND_ANGLE)
        w[k + 1] = w[k] @ step
    bp = np.linspace(span[0], span[1], segments + 1)
    return OrthoDiagPath(q, d, act, w, bp)
