"""Continuous factorization of the identity along a matrix path.

The construction mirrors the static case pointwise and stitches local
solutions:

1. ``build_cover`` walks the domain left to right.  At the current left
   endpoint it greedily selects an almost-orthogonal family (with a margin:
   threshold ``eps/2``), then extends the interval segment by segment while
   the exact quadratic extrema certify every family pair below ``eps``,
   bisecting the first failing segment to place the node.
2. ``build_bridges`` selects, at each interior node, a bridge family
   disjoint from and almost orthogonal to the two adjacent families, and
   certifies a window around the node the same way, then clips windows so
   they interleave strictly between nodes.
3. Between windows the factors are the static ones for the interval family;
   inside a window they blend ``sqrt(lam) R_F + sqrt(1-lam) R_G`` with a
   piecewise-linear tent ``lam`` (1 at the window edges, 0 at the node), so
   the two case formulas agree exactly at shared endpoints.
4. The raw product ``L A R`` stays within 1/4 of the identity by
   construction, so the lazy correction ``(L A R)^{-1} L`` is applied at
   evaluation time, making the product exactly the identity while keeping
   ``||L|| ||R|| <= 2/theta``.

Everything here touches the path only through the column-access protocol of
:mod:`idfactor.paths`; no interpolated frame is ever materialized, so
verification grids run in small space even at five-digit N.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    HypothesisError,
    InfeasibleError,
    StallError,
    VerificationError,
)
from .linalg import format_real
from .paths import PathBase, path_norm_bound, path_theta, segment_inner_extrema
from .selection import greedy_family
from .static import _rank_floor

__all__ = [
    "CoverPlan",
    "FactorPath",
    "PathCertificate",
    "blend_R",
    "blend_L",
    "blend_estimates",
    "continuous_epsilon",
    "continuous_max_rank",
    "build_cover",
    "build_bridges",
    "raw_factor_at",
    "corrected_factor_at",
    "factor_path",
    "verify_path",
    "recertify_plan",
    "stitch_discrepancy",
    "write_plan",
    "read_plan",
]

DEFAULT_TOL = 1e-9
DEFAULT_GRID = 4001
_NORM_SLACK = 1e-9
# Deterministic window clipping: each window side keeps at most this
# fraction of the gap toward the neighboring node, so adjacent windows can
# never meet (2 * 0.45 < 1).
_WINDOW_CLIP = 0.45


# ---------------------------------------------------------------------------
# blending (matrix form)
# ---------------------------------------------------------------------------

def _blend_prepare(a, f1, f2, lam):
    a = np.asarray(a, dtype=float)
    f1 = tuple(sorted(int(i) for i in f1))
    f2 = tuple(sorted(int(i) for i in f2))
    if len(f1) != len(f2):
        raise DimensionError(f"family sizes differ: {len(f1)} vs {len(f2)}")
    if set(f1) & set(f2):
        raise DimensionError("families must be disjoint")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return a, f1, f2


def blend_R(a, f1, f2, lam: float) -> np.ndarray:
    """``sqrt(lam) R_(A,F1) + sqrt(1-lam) R_(A,F2)``; at ``lam`` 1/0 this is
    exactly the unblended factor."""
    from .static import build_R

    a, f1, f2 = _blend_prepare(a, f1, f2, lam)
    if lam == 1.0:
        return build_R(a, f1)
    if lam == 0.0:
        return build_R(a, f2)
    return np.sqrt(lam) * build_R(a, f1) + np.sqrt(1.0 - lam) * build_R(a, f2)


def blend_L(a, f1, f2, lam: float) -> np.ndarray:
    """``sqrt(lam) L_(A,F1) + sqrt(1-lam) L_(A,F2)``; equals
    ``(A blend_R)^T`` up to rounding (asserted in tests, not assumed)."""
    from .static import build_L

    a, f1, f2 = _blend_prepare(a, f1, f2, lam)
    if lam == 1.0:
        return build_L(a, f1)
    if lam == 0.0:
        return build_L(a, f2)
    return np.sqrt(lam) * build_L(a, f1) + np.sqrt(1.0 - lam) * build_L(a, f2)


def blend_estimates(a, f1, f2):
    """Uniform-in-lambda bounds ``(1/theta, 1 + sqrt(2n) sqrt(eps)/theta,
    2 n eps / theta^2)`` with theta/eps over the union of the families."""
    a, f1, f2 = _blend_prepare(a, f1, f2, 0.5)
    union = sorted(set(f1) | set(f2))
    sub = a[:, union]
    norms = np.linalg.norm(sub, axis=0)
    theta = float(norms.min())
    if theta <= 0:
        raise HypothesisError("blend family contains a zero-norm column")
    gram = sub.T @ sub
    eps = float(np.abs(gram - np.diag(np.diag(gram))).max())
    n = len(f1)
    return (
        1.0 / theta,
        1.0 + np.sqrt(2.0 * n * eps) / theta,
        2.0 * n * eps / theta**2,
    )


def continuous_epsilon(theta: float, n: int) -> float:
    """Driver threshold ``theta^2 / (18 n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return theta**2 / (18.0 * n)


def continuous_max_rank(n_cols: int, theta: float) -> int:
    """Guaranteed continuous rank ``floor(theta^(4/3) N^(1/3) / 12)``."""
    if not 0 < theta <= 1:
        raise HypothesisError(f"theta={theta:g} must lie in (0, 1]")
    return _rank_floor(n_cols, theta, 12.0)


# ---------------------------------------------------------------------------
# cover plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverPlan:
    """Constructive record of the interval cover: nodes, per-interval
    families, bridge families and blend windows at interior nodes."""

    nodes: tuple
    families: tuple
    bridges: tuple
    windows: tuple
    epsilon: float
    n: int
    theta: float

    @property
    def intervals(self) -> int:
        return len(self.families)

    def regions(self):
        """Ordered evaluation regions ``(lo, hi, kind, fam, bridge)`` where
        kind A holds a single family and kinds B/C blend it with a bridge
        (lambda runs 1 -> 0 on B and 0 -> 1 on C)."""
        out = []
        lo = self.nodes[0]
        for m in range(1, len(self.nodes)):
            fam = self.families[m - 1]
            if m < len(self.nodes) - 1:
                s, u = self.windows[m - 1]
                g = self.bridges[m - 1]
                out.append((lo, s, "A", fam, None))
                out.append((s, self.nodes[m], "B", fam, g))
                out.append((self.nodes[m], u, "C", self.families[m], g))
                lo = u
            else:
                out.append((lo, self.nodes[m], "A", fam, None))
        return out


def _pairs_within(fam):
    fam = list(fam)
    return [(fam[i], fam[j]) for i in range(len(fam))
            for j in range(i + 1, len(fam))]


def _bridge_pairs(bridge, fam_left, fam_right):
    others = sorted((set(fam_left) | set(fam_right) | set(bridge)))
    return [(i, j) for i in bridge for j in others if i != j]


def _pair_certified(path: PathBase, seg: int, i: int, j: int,
                    s_lo: float, s_hi: float, eps: float) -> bool:
    ext = segment_inner_extrema(path, seg, i, j, s_lo, s_hi)
    return -eps < ext.lo and ext.hi < eps


def _range_certified(path, pairs, seg, s_lo, s_hi, eps):
    return all(_pair_certified(path, seg, i, j, s_lo, s_hi, eps)
               for i, j in pairs)


def _first_violation(path, pairs, seg, s_lo, s_hi, eps):
    for i, j in pairs:
        if not _pair_certified(path, seg, i, j, s_lo, s_hi, eps):
            return (i, j)
    return None


def _certified_reach(path: PathBase, pairs, t_from: float, eps: float,
                     node_res: float, t_limit: float, forward: bool = True):
    """Largest certified extent from ``t_from`` toward ``t_limit``.

    Returns ``(t_reach, violating_pair)``; the pair is None when the limit
    was reached.  Walks whole segments and bisects the first failing one to
    within ``node_res``.
    """
    bp = path.breakpoints
    if not pairs:
        return t_limit, None
    if forward:
        k, s = path.segment_of(t_from)
        if s == 1.0 and k + 1 < path.num_segments:
            k, s = k + 1, 0.0
        reach = t_from
        while True:
            seg_end = min(float(bp[k + 1]), t_limit)
            s_hi = (seg_end - bp[k]) / (bp[k + 1] - bp[k])
            if _range_certified(path, pairs, k, s, s_hi, eps):
                reach = seg_end
                if seg_end >= t_limit:
                    return t_limit, None
                k, s = k + 1, 0.0
                if k >= path.num_segments:
                    return reach, None
                continue
            pair = _first_violation(path, pairs, k, s, s_hi, eps)
            h = float(bp[k + 1] - bp[k])
            lo, hi = s, s_hi
            while (hi - lo) * h > node_res:
                mid = 0.5 * (lo + hi)
                if _range_certified(path, pairs, k, s, mid, eps):
                    lo = mid
                else:
                    hi = mid
            return float(bp[k] + lo * h), pair
    else:
        k, s = path.segment_of(t_from)
        if s == 0.0 and k > 0:
            k, s = k - 1, 1.0
        reach = t_from
        while True:
            seg_start = max(float(bp[k]), t_limit)
            s_lo = (seg_start - bp[k]) / (bp[k + 1] - bp[k])
            if _range_certified(path, pairs, k, s_lo, s, eps):
                reach = seg_start
                if seg_start <= t_limit:
                    return t_limit, None
                k, s = k - 1, 1.0
                if k < 0:
                    return reach, None
                continue
            pair = _first_violation(path, pairs, k, s_lo, s, eps)
            h = float(bp[k + 1] - bp[k])
            lo, hi = s, s_lo
            while (lo - hi) * h > node_res:
                mid = 0.5 * (lo + hi)
                if _range_certified(path, pairs, k, mid, s, eps):
                    lo = mid
                else:
                    hi = mid
            return float(bp[k] + lo * h), pair


def _select_family_at(path: PathBase, t: float, n: int, eps: float,
                      strict: bool):
    if n == 1:
        return (0,)
    if eps <= 0:
        raise ValueError("eps must be positive")
    n_cols = path.N
    if strict:
        limit = 1.0 / np.sqrt(n - 1)
        if eps >= limit + 1e-9:
            raise InfeasibleError(
                f"eps={eps:g} must be below 1/sqrt(n-1)={limit:g}"
            )
        if n_cols < n / eps**2 - 1e-9:
            raise InfeasibleError(
                f"N={n_cols} cannot guarantee a family of {n} at eps={eps:g}"
            )
    return greedy_family(lambda i: path.inner_all(t, i), n_cols, n, eps,
                         start=0)


def build_cover(path: PathBase, n: int, eps: float, *, margin: float = 0.5,
                node_resolution: float | None = None, strict: bool = True):
    """Nodes and families covering the domain: each family is selected at
    the interval's left endpoint with threshold ``margin * eps`` and the
    interval extends as far as exact segment extrema certify every family
    pair strictly below ``eps``."""
    a, b = path.domain
    if node_resolution is None:
        node_resolution = (b - a) * 1e-6
    if not 0 < margin <= 1:
        raise ValueError("margin must lie in (0, 1]")
    nodes = [a]
    families = []
    tau = a
    while tau < b:
        fam = _select_family_at(path, tau, n, margin * eps, strict)
        reach, pair = _certified_reach(path, _pairs_within(fam), tau, eps,
                                       node_resolution, b, forward=True)
        if reach - tau < node_resolution:
            raise StallError(
                f"cover stalled at t={tau!r}: family {fam} certified extent "
                f"{reach - tau:g} is below resolution {node_resolution:g}"
                + (f" (violating pair {pair})" if pair else ""),
                at=tau, pair=pair,
            )
        nodes.append(reach)
        families.append(fam)
        tau = reach
    return tuple(nodes), tuple(families)


def build_bridges(path: PathBase, nodes, families, eps: float, *,
                  node_resolution: float | None = None, strict: bool = True,
                  window_clip: float = _WINDOW_CLIP):
    """Bridge families and blend windows at every interior node.

    The bridge is greedily selected at the node (full ``eps``), disjoint
    from both adjacent families; its window is the maximal exactly-certified
    extent of the bridge inequalities, clipped to at most ``window_clip`` of
    the gap toward each neighboring node so windows interleave strictly.
    """
    a, b = path.domain
    if node_resolution is None:
        node_resolution = (b - a) * 1e-6
    if not 0 < window_clip < 0.5:
        raise ValueError("window_clip must lie in (0, 0.5)")
    n = len(families[0]) if families else 0
    n_cols = path.N
    bridges = []
    windows = []
    for m in range(1, len(nodes) - 1):
        t_m = nodes[m]
        f_left, f_right = families[m - 1], families[m]
        if strict:
            if len(f_left) != n or len(f_right) != n:
                raise InfeasibleError("families must share a common size")
            if n >= 2 and eps >= 1.0 / np.sqrt(n - 1) + 1e-9:
                raise InfeasibleError("eps too large for bridge selection")
            if n_cols < 5.0 * n / eps**2 - 1e-9:
                raise InfeasibleError(
                    f"N={n_cols} cannot guarantee bridges at eps={eps:g}; "
                    f"need N >= {5.0 * n / eps**2:g}"
                )
        banned = np.zeros(n_cols, dtype=bool)
        for i in set(f_left) | set(f_right):
            banned[i] = True
            banned |= np.abs(path.inner_all(t_m, i)) >= eps
        bridge = greedy_family(lambda i: path.inner_all(t_m, i), n_cols, n,
                               eps, banned=banned)
        pairs = _bridge_pairs(bridge, f_left, f_right)
        u_raw, pair_u = _certified_reach(path, pairs, t_m, eps,
                                         node_resolution, nodes[m + 1],
                                         forward=True)
        s_raw, pair_s = _certified_reach(path, pairs, t_m, eps,
                                         node_resolution, nodes[m - 1],
                                         forward=False)
        if u_raw - t_m < node_resolution or t_m - s_raw < node_resolution:
            bad = pair_u if u_raw - t_m < node_resolution else pair_s
            raise StallError(
                f"window stalled at node t={t_m!r}: certified extent below "
                f"resolution {node_resolution:g}"
                + (f" (violating pair {bad})" if bad else ""),
                at=t_m, pair=bad,
            )
        s_m = max(s_raw, t_m - window_clip * (t_m - nodes[m - 1]))
        u_m = min(u_raw, t_m + window_clip * (nodes[m + 1] - t_m))
        bridges.append(bridge)
        windows.append((float(s_m), float(u_m)))
    _assert_interleaving(nodes, windows)
    return tuple(bridges), tuple(windows)


def _assert_interleaving(nodes, windows):
    chain = [nodes[0]]
    for m in range(1, len(nodes) - 1):
        s, u = windows[m - 1]
        chain.extend([s, nodes[m], u])
    chain.append(nodes[-1])
    diffs = np.diff(np.array(chain))
    if np.any(diffs <= 0):
        raise VerificationError(
            f"window interleaving violated in chain {chain}"
        )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _region_of(plan: CoverPlan, t: float):
    regions = plan.regions()
    los = [r[0] for r in regions]
    idx = min(max(bisect_right(los, t) - 1, 0), len(regions) - 1)
    return regions[idx]


def _region_lambda(region, t: float) -> float:
    lo, hi, kind = region[0], region[1], region[2]
    if kind == "A":
        return 1.0
    if hi == lo:
        return 1.0 if kind == "B" else 0.0
    if kind == "B":
        return (hi - t) / (hi - lo)
    return (t - lo) / (hi - lo)


def _region_indices(region):
    _, _, kind, fam, bridge = region
    return (list(fam), []) if kind == "A" else (list(fam), list(bridge))


def raw_factor_at(plan: CoverPlan, path: PathBase, t: float):
    """Pre-correction factors ``(L, R)`` at ``t``: the interval family's
    static factors between windows, the bridge blend inside them;
    ``L = (A(t) R)^T`` throughout."""
    a, b = path.domain
    if not a <= t <= b:
        raise DimensionError(f"t={t!r} outside domain [{a!r}, {b!r}]")
    region = _region_of(plan, t)
    lam = _region_lambda(region, t)
    fam, bridge = _region_indices(region)
    n = len(fam)
    n_cols = path.N
    r = np.zeros((n_cols, n))
    b_mat = np.empty((n_cols, n))
    w_f = np.sqrt(lam)
    w_g = np.sqrt(1.0 - lam)
    for c in range(n):
        i = fam[c]
        norm_i = path.colnorm_at(t, i)
        if norm_i <= 0:
            raise HypothesisError(f"column {i} has zero norm at t={t!r}")
        r[i, c] = w_f / norm_i
        col = (w_f / norm_i) * path.col_at(t, i)
        if bridge:
            j = bridge[c]
            norm_j = path.colnorm_at(t, j)
            if norm_j <= 0:
                raise HypothesisError(f"column {j} has zero norm at t={t!r}")
            r[j, c] = w_g / norm_j
            col = col + (w_g / norm_j) * path.col_at(t, j)
        b_mat[:, c] = col
    return b_mat.T, r


def corrected_factor_at(plan: CoverPlan, path: PathBase, t: float):
    """Exact factors ``(L~, R)`` at ``t``: ``L~ = (L A R)^{-1} L`` applied to
    the raw pair, so ``L~ A(t) R = I_n`` up to rounding."""
    ell, r = raw_factor_at(plan, path, t)
    s = ell @ ell.T  # L A R = (A R)^T (A R)
    dev = np.abs(np.linalg.eigvalsh(s) - 1.0).max()
    if dev >= 1.0:
        raise VerificationError(
            f"raw deviation {dev:g} >= 1 at t={t!r}: plan certification "
            "was violated"
        )
    ell_tilde = np.linalg.solve(s, ell)
    return ell_tilde, r


@dataclass(frozen=True)
class FactorPath:
    """Evaluable continuous factorization: a certified plan over a source
    path, with correction applied lazily at query time."""

    plan: CoverPlan
    path: PathBase
    n: int
    theta: float

    def factors_at(self, t: float):
        return corrected_factor_at(self.plan, self.path, t)

    def raw_at(self, t: float):
        return raw_factor_at(self.plan, self.path, t)


@dataclass(frozen=True)
class PathCertificate:
    """Grid-recomputed witness for a FactorPath."""

    grid: int
    max_dev: float
    max_product: float
    max_raw_dev: float
    max_raw_product: float
    max_jump: float
    theta: float
    budget: float
    passed: bool
    argmax_dev: float = 0.0
    argmax_product: float = 0.0
    nodes: tuple = ()
    windows: tuple = ()


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def factor_path(path: PathBase, n: int | None = None, *,
                tol: float = DEFAULT_TOL, rel_tol: float = 1e-10,
                grid: int = DEFAULT_GRID,
                node_resolution: float | None = None):
    """End-to-end continuous factorization with certificate.

    Hypotheses: ``||A(t)|| <= 1`` (certified via breakpoint frame norms and
    segment convexity) and ``theta = inf_t min_i ||a_i(t)|| > 0``.  The
    guaranteed rank is ``floor(theta^(4/3) N^(1/3) / 12)``; ``n = 1`` is
    accepted unconditionally (single-column construction).  The driver
    threshold is ``eps = theta^2 / (18 n)``.
    """
    bound = path_norm_bound(path, rel_tol)
    if bound > 1.0 + _NORM_SLACK:
        raise HypothesisError(
            f"hypothesis (i) failed: sup ||A(t)|| bound = {bound:.12g} > 1"
        )
    theta = path_theta(path)
    if theta <= 0.0:
        raise HypothesisError(
            "hypothesis (ii) failed: some column norm vanishes on the "
            "domain (theta = 0)"
        )
    nmax = continuous_max_rank(path.N, theta)
    if n is None:
        # Rank 1 is unconditional (single normalized column), so auto never
        # refuses a path that satisfies the hypotheses.
        n = max(nmax, 1)
    n = int(n)
    if n < 1:
        raise HypothesisError("n must be >= 1")
    if n > 1 and n > nmax:
        raise HypothesisError(
            f"n={n} exceeds the guaranteed continuous rank {nmax} for "
            f"N={path.N}, theta={theta:g}"
        )
    eps = continuous_epsilon(theta, n)
    if n >= 2 and path.N < 5.0 * n / eps**2 - 1e-9:
        raise HypothesisError(
            f"N={path.N} below the bridge requirement 5n/eps^2 = "
            f"{5.0 * n / eps**2:g}"
        )
    nodes, families = build_cover(path, n, eps,
                                  node_resolution=node_resolution)
    if len(families) > 1:
        bridges, windows = build_bridges(path, nodes, families, eps,
                                         node_resolution=node_resolution)
    else:
        bridges, windows = (), ()
    plan = CoverPlan(nodes=nodes, families=families, bridges=bridges,
                     windows=windows, epsilon=eps, n=n, theta=theta)
    fpath = FactorPath(plan=plan, path=path, n=n, theta=theta)
    cert = verify_path(path, fpath, grid, tol)
    return fpath, cert


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _grid_points(path: PathBase, plan: CoverPlan, grid_count: int):
    a, b = path.domain
    extras = [np.asarray(plan.nodes), np.asarray(path.breakpoints)]
    for s, u in plan.windows:
        extras.append(np.array([s, u]))
    pts = np.unique(np.concatenate([np.linspace(a, b, grid_count)] + extras))
    return pts[(pts >= a) & (pts <= b)]


class _CellEval:
    """Batched small-space evaluation of one (region x segment) cell.

    With base columns ``C`` (the involved path columns at both segment
    frames) the blended product matrix is ``B(t) = C W(t)``, so every
    certificate quantity reduces to the fixed Gram ``C^T C`` and the tiny
    per-point coefficient matrices ``W(t)``.
    """

    def __init__(self, path, region, seg, ts):
        self.ts = ts
        fam, bridge = _region_indices(region)
        self.fam, self.bridge = fam, bridge
        idxs = fam + bridge
        self.idxs = idxs
        p = len(idxs)
        bp = path.breakpoints
        h = float(bp[seg + 1] - bp[seg])
        s = (ts - float(bp[seg])) / h
        lam = np.array([_region_lambda(region, t) for t in ts])
        # exact per-column norm quadratics on this segment
        q0 = np.array([path.col_dot(seg, i, seg, i) for i in idxs])
        qc = np.array([path.col_dot(seg, i, seg + 1, i) for i in idxs])
        q1 = np.array([path.col_dot(seg + 1, i, seg + 1, i) for i in idxs])
        norms = np.sqrt(np.maximum(
            np.outer((1 - s) ** 2, q0) + np.outer(2 * s * (1 - s), qc)
            + np.outer(s**2, q1), 0.0))  # (T, p)
        base = [(seg, i) for i in idxs] + [(seg + 1, i) for i in idxs]
        self.base = base
        gb = np.empty((2 * p, 2 * p))
        for aa, (ka, ia) in enumerate(base):
            for bb in range(aa, 2 * p):
                kb, ib = base[bb]
                gb[aa, bb] = gb[bb, aa] = path.col_dot(ka, ia, kb, ib)
        self.gb = gb
        n = len(fam)
        tcount = len(ts)
        w = np.zeros((tcount, 2 * p, n))
        wf = np.sqrt(lam)
        cols = np.arange(n)
        coef_f = wf[:, None] / norms[:, :n]  # (T, n)
        w[:, cols, cols] = coef_f * (1 - s)[:, None]
        w[:, p + cols, cols] = coef_f * s[:, None]
        if bridge:
            wg = np.sqrt(1.0 - lam)
            coef_g = wg[:, None] / norms[:, n:2 * n]
            w[:, n + cols, cols] = coef_g * (1 - s)[:, None]
            w[:, p + n + cols, cols] = coef_g * s[:, None]
        self.w = w
        # R gram is diagonal: family and bridge rows are disjoint
        r_diag = (wf[:, None] / norms[:, :n]) ** 2
        self.r_entries_f = wf[:, None] / norms[:, :n]
        if bridge:
            wg = np.sqrt(1.0 - lam)
            r_diag = r_diag + (wg[:, None] / norms[:, n:2 * n]) ** 2
            self.r_entries_g = wg[:, None] / norms[:, n:2 * n]
        else:
            self.r_entries_g = None
        self.r_norms = np.sqrt(r_diag.max(axis=1))
        self.s_mats = np.einsum("tqc,qr,trd->tcd", w, gb, w)

    def stats(self):
        """(raw_dev, raw_product, dev, product) arrays over the cell."""
        s_mats = self.s_mats
        n = s_mats.shape[1]
        eye = np.eye(n)
        eigs = np.linalg.eigvalsh(s_mats)
        raw_dev = np.abs(eigs - 1.0).max(axis=1)
        raw_norm_l = np.sqrt(np.maximum(eigs[:, -1], 0.0))
        raw_product = raw_norm_l * self.r_norms
        if np.any(eigs[:, 0] <= 0):
            raise VerificationError(
                "blended product matrix is singular on the grid; plan "
                "certification was violated"
            )
        # corrected: L~ = S^{-1} L with L = B^T, so Y = S^{-1} W^T carries
        # the honest rounding of the solve
        y = np.linalg.solve(s_mats, self.w.transpose(0, 2, 1))  # (T, n, 2p)
        self.y = y
        lt_gram = np.einsum("tcq,qr,tdr->tcd", y, self.gb, y)
        norm_lt = np.sqrt(np.maximum(
            np.linalg.eigvalsh(lt_gram)[:, -1], 0.0))
        product = norm_lt * self.r_norms
        # dev = ||L~ A R - I|| = ||S^{-1} S - I|| with the solve's rounding
        x = np.linalg.solve(s_mats, s_mats) - eye
        dev = np.linalg.svd(x, compute_uv=False)[:, 0]
        return raw_dev, raw_product, dev, product

    def point_state(self, which: int):
        """(base, y_row, r_state) for jump computation at an endpoint."""
        r_rows = {}
        for c, i in enumerate(self.fam):
            r_rows[(i, c)] = self.r_entries_f[which, c]
        if self.bridge:
            for c, j in enumerate(self.bridge):
                r_rows[(j, c)] = r_rows.get((j, c), 0.0) + self.r_entries_g[which, c]
        return self.base, self.y[which], r_rows


def _jump_within(cell: _CellEval):
    """Max jump of L~ and R between consecutive grid points inside a cell."""
    y = cell.y
    if y.shape[0] < 2:
        return 0.0
    dy = y[1:] - y[:-1]
    gram = np.einsum("tcq,qr,tdr->tcd", dy, cell.gb, dy)
    jl = np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[:, -1], 0.0))
    # R jumps: entry patterns agree within a cell, columns have disjoint rows
    df = cell.r_entries_f[1:] - cell.r_entries_f[:-1]
    diag = df**2
    if cell.r_entries_g is not None:
        dg = cell.r_entries_g[1:] - cell.r_entries_g[:-1]
        diag = diag + dg**2
    jr = np.sqrt(diag.max(axis=1))
    return float(max(jl.max(), jr.max()))


def _jump_across(path, state_a, state_b):
    """Jump between the last point of one cell and the first of the next."""
    base_a, ya, ra = state_a
    base_b, yb, rb = state_b
    base = base_a + base_b
    m = len(base)
    g = np.empty((m, m))
    for aa, (ka, ia) in enumerate(base):
        for bb in range(aa, m):
            kb, ib = base[bb]
            g[aa, bb] = g[bb, aa] = path.col_dot(ka, ia, kb, ib)
    stack = np.concatenate([-ya, yb], axis=1)  # (n, 2p_a + 2p_b)
    gram = stack @ g @ stack.T
    jl = float(np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0)))
    n = ya.shape[0]
    rows = sorted({k[0] for k in ra} | {k[0] for k in rb})
    pos = {i: q for q, i in enumerate(rows)}
    dr = np.zeros((len(rows), n))
    for (i, c), v in rb.items():
        dr[pos[i], c] += v
    for (i, c), v in ra.items():
        dr[pos[i], c] -= v
    jr = float(np.sqrt(max(np.linalg.eigvalsh(dr.T @ dr)[-1], 0.0)))
    return max(jl, jr)


def verify_path(path: PathBase, fpath: FactorPath, grid_count: int = DEFAULT_GRID,
                tol: float = DEFAULT_TOL) -> PathCertificate:
    """Recompute the certificate on a uniform grid augmented with all plan
    nodes, window endpoints and path breakpoints.

    Reports the max identity deviation and norm product of the corrected
    factors, the raw-phase maxima, and the largest jump between adjacent
    grid samples; passes iff ``max_dev <= tol`` and
    ``max_product <= 2/theta + tol``.
    """
    if grid_count < 2:
        raise ValueError("grid_count must be >= 2")
    plan = fpath.plan
    pts = _grid_points(path, plan, grid_count)
    regions = plan.regions()
    region_los = [r[0] for r in regions]
    bp = path.breakpoints

    max_dev = max_prod = max_raw_dev = max_raw_prod = -np.inf
    arg_dev = arg_prod = float(pts[0])
    max_jump = 0.0
    prev_state = None
    cursor = 0
    while cursor < len(pts):
        t0 = pts[cursor]
        ridx = min(max(bisect_right(region_los, t0) - 1, 0), len(regions) - 1)
        region = regions[ridx]
        seg, s0 = path.segment_of(float(t0))
        if s0 == 1.0 and seg + 1 < path.num_segments:
            seg += 1
        hi = min(region[1], float(bp[seg + 1]))
        end = cursor
        while end < len(pts) and pts[end] <= hi:
            end += 1
        if end == cursor:
            end = cursor + 1
        cell = _CellEval(path, region, seg, pts[cursor:end])
        raw_dev, raw_prod, dev, prod = cell.stats()
        i_dev = int(np.argmax(dev))
        if dev[i_dev] > max_dev:
            max_dev, arg_dev = float(dev[i_dev]), float(pts[cursor + i_dev])
        i_prod = int(np.argmax(prod))
        if prod[i_prod] > max_prod:
            max_prod = float(prod[i_prod])
            arg_prod = float(pts[cursor + i_prod])
        max_raw_dev = max(max_raw_dev, float(raw_dev.max()))
        max_raw_prod = max(max_raw_prod, float(raw_prod.max()))
        max_jump = max(max_jump, _jump_within(cell))
        if prev_state is not None:
            max_jump = max(max_jump,
                           _jump_across(path, prev_state, cell.point_state(0)))
        prev_state = cell.point_state(len(cell.ts) - 1)
        cursor = end

    budget = 2.0 / fpath.theta
    passed = max_dev <= tol and max_prod <= budget + tol
    return PathCertificate(
        grid=len(pts), max_dev=max_dev, max_product=max_prod,
        max_raw_dev=max_raw_dev, max_raw_product=max_raw_prod,
        max_jump=max_jump, theta=fpath.theta, budget=budget, passed=passed,
        argmax_dev=arg_dev, argmax_product=arg_prod,
        nodes=tuple(float(x) for x in plan.nodes),
        windows=tuple((float(s), float(u)) for s, u in plan.windows),
    )


def recertify_plan(path: PathBase, plan: CoverPlan) -> list[str]:
    """Re-derive every inequality a plan claims, from the path alone.

    Returns a list of human-readable violations (empty when sound):
    structural invariants, strict interleaving, family inequalities on each
    interval, and bridge inequalities on each window, all via exact segment
    extrema.
    """
    problems = []
    nodes = plan.nodes
    if len(nodes) < 2 or any(nodes[i] >= nodes[i + 1]
                             for i in range(len(nodes) - 1)):
        problems.append(f"nodes not strictly increasing: {nodes}")
        return problems
    a, b = path.domain
    if nodes[0] != a or nodes[-1] != b:
        problems.append(f"nodes {nodes[0]}..{nodes[-1]} do not span "
                        f"[{a}, {b}]")
    if len(plan.families) != len(nodes) - 1:
        problems.append("family count does not match interval count")
        return problems
    if len(plan.bridges) != max(len(nodes) - 2, 0) or \
            len(plan.windows) != len(plan.bridges):
        problems.append("bridge/window count does not match interior nodes")
        return problems
    for fam in plan.families:
        if len(fam) != plan.n or len(set(fam)) != plan.n:
            problems.append(f"family {fam} does not have {plan.n} distinct "
                            "indices")
        if any(not 0 <= i < path.N for i in fam):
            problems.append(f"family {fam} has out-of-range indices")
    for m, g in enumerate(plan.bridges, start=1):
        overlap = set(g) & (set(plan.families[m - 1]) | set(plan.families[m]))
        if len(g) != plan.n or overlap:
            problems.append(f"bridge {g} at node {m} invalid "
                            f"(overlap {sorted(overlap)})")
    try:
        _assert_interleaving(nodes, plan.windows)
    except VerificationError as exc:
        problems.append(str(exc))
    if problems:
        return problems
    eps = plan.epsilon
    for m, fam in enumerate(plan.families):
        lo, hi = nodes[m], nodes[m + 1]
        for (i, j) in _pairs_within(fam):
            bad = _max_abs_inner_on(path, i, j, lo, hi)
            if bad >= eps:
                problems.append(
                    f"family pair ({i},{j}) reaches |inner|={bad:.6g} >= "
                    f"eps={eps:.6g} on interval [{lo:.6g}, {hi:.6g}]"
                )
    for m, (g, (s, u)) in enumerate(zip(plan.bridges, plan.windows), start=1):
        for (i, j) in _bridge_pairs(g, plan.families[m - 1], plan.families[m]):
            bad = _max_abs_inner_on(path, i, j, s, u)
            if bad >= eps:
                problems.append(
                    f"bridge pair ({i},{j}) reaches |inner|={bad:.6g} >= "
                    f"eps={eps:.6g} on window [{s:.6g}, {u:.6g}]"
                )
    return problems


def _max_abs_inner_on(path: PathBase, i: int, j: int, lo: float,
                      hi: float) -> float:
    worst = 0.0
    bp = path.breakpoints
    k_lo, s_lo = path.segment_of(lo)
    if s_lo == 1.0 and k_lo + 1 < path.num_segments:
        k_lo, s_lo = k_lo + 1, 0.0
    k = k_lo
    while True:
        seg_lo = s_lo if k == k_lo else 0.0
        seg_hi_t = min(float(bp[k + 1]), hi)
        seg_hi = (seg_hi_t - bp[k]) / (bp[k + 1] - bp[k])
        ext = segment_inner_extrema(path, k, i, j, seg_lo, seg_hi)
        worst = max(worst, abs(ext.lo), abs(ext.hi))
        if seg_hi_t >= hi or k + 1 >= path.num_segments:
            return worst
        k += 1


def stitch_discrepancy(plan: CoverPlan, path: PathBase) -> float:
    """Largest entrywise disagreement between the two case formulas at every
    window boundary and node (expected 0: the blend weights are exactly 1
    and 0 there)."""
    from .static import build_R

    worst = 0.0
    for m in range(1, len(plan.nodes) - 1):
        s_m, u_m = plan.windows[m - 1]
        t_m = plan.nodes[m]
        f_left, f_right = plan.families[m - 1], plan.families[m]
        g = plan.bridges[m - 1]
        for t, fam, lam in ((s_m, f_left, 1.0), (u_m, f_right, 1.0)):
            r_blend = _r_dense_at(path, t, fam, g, lam)
            r_plain = _r_dense_at(path, t, fam, None, 1.0)
            worst = max(worst, float(np.abs(r_blend - r_plain).max()))
        r_b = _r_dense_at(path, t_m, f_left, g, 0.0)
        r_c = _r_dense_at(path, t_m, f_right, g, 0.0)
        worst = max(worst, float(np.abs(r_b - r_c).max()))
    return worst


def _r_dense_at(path: PathBase, t: float, fam, bridge, lam: float):
    n = len(fam)
    r = np.zeros((path.N, n))
    for c in range(n):
        r[fam[c], c] = np.sqrt(lam) / path.colnorm_at(t, fam[c])
        if bridge is not None and lam < 1.0:
            r[bridge[c], c] += np.sqrt(1.0 - lam) / path.colnorm_at(t, bridge[c])
    return r


# ---------------------------------------------------------------------------
# plan and certificate text formats
# ---------------------------------------------------------------------------

def write_plan(plan: CoverPlan, file_path) -> None:
    """Flat text: scalars, node list, then families/bridges/windows
    (semicolon-separated groups, comma-separated 0-based indices)."""
    from .linalg import _atomic_write

    lines = [
        f"n={plan.n}",
        f"epsilon={format_real(plan.epsilon)}",
        f"theta={format_real(plan.theta)}",
        "nodes=" + ",".join(format_real(t) for t in plan.nodes),
        "F=" + ";".join(",".join(str(i) for i in fam)
                        for fam in plan.families),
        "G=" + ";".join(",".join(str(i) for i in g) for g in plan.bridges),
        "W=" + ";".join(f"{format_real(s)}:{format_real(u)}"
                        for s, u in plan.windows),
    ]
    _atomic_write(file_path, "\n".join(lines) + "\n")


def read_plan(file_path) -> CoverPlan:
    fields = {}
    with open(file_path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected key=value", line=lineno)
            key, value = line.split("=", 1)
            fields[key] = value
    try:
        families = tuple(
            tuple(int(i) for i in grp.split(","))
            for grp in fields["F"].split(";") if grp
        )
        bridges = tuple(
            tuple(int(i) for i in grp.split(","))
            for grp in fields["G"].split(";") if grp
        )
        windows = tuple(
            (float(grp.split(":")[0]), float(grp.split(":")[1]))
            for grp in fields["W"].split(";") if grp
        )
        return CoverPlan(
            nodes=tuple(float(x) for x in fields["nodes"].split(",")),
            families=families,
            bridges=bridges,
            windows=windows,
            epsilon=float(fields["epsilon"]),
            n=int(fields["n"]),
            theta=float(fields["theta"]),
        )
    except KeyError as exc:
        raise FormatError(f"missing plan field {exc}") from None
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad plan value: {exc}") from None


_PATH_CERT_FIELDS = ("max_dev", "max_product", "max_raw_dev",
                     "max_raw_product", "max_jump", "theta", "budget")


def write_path_certificate(cert: PathCertificate, file_path) -> None:
    from .linalg import _atomic_write

    lines = [f"{k}={format_real(getattr(cert, k))}"
             for k in _PATH_CERT_FIELDS]
    lines.append(f"grid={cert.grid}")
    lines.append(f"pass={1 if cert.passed else 0}")
    lines.append("nodes=" + ",".join(format_real(t) for t in cert.nodes))
    lines.append("windows=" + ";".join(f"{format_real(s)}:{format_real(u)}"
                                       for s, u in cert.windows))
    _atomic_write(file_path, "\n".join(lines) + "\n")


def read_path_certificate(file_path) -> PathCertificate:
    fields = {}
    with open(file_path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected key=value", line=lineno)
            key, value = line.split("=", 1)
            fields[key] = value
    try:
        windows = tuple(
            (float(grp.split(":")[0]), float(grp.split(":")[1]))
            for grp in fields["windows"].split(";") if grp
        )
        return PathCertificate(
            grid=int(fields["grid"]),
            max_dev=float(fields["max_dev"]),
            max_product=float(fields["max_product"]),
            max_raw_dev=float(fields["max_raw_dev"]),
            max_raw_product=float(fields["max_raw_product"]),
            max_jump=float(fields["max_jump"]),
            theta=float(fields["theta"]),
            budget=float(fields["budget"]),
            passed=fields["pass"] == "1",
            nodes=tuple(float(x) for x in fields["nodes"].split(",") if x),
            windows=windows,
        )
    except KeyError as exc:
        raise FormatError(f"missing certificate field {exc}") from None
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad certificate value: {exc}") from None


def check_path_certificate_match(stored: PathCertificate,
                                 recomputed: PathCertificate,
                                 match_tol: float = 1e-12) -> list[str]:
    """Stored-vs-recomputed agreement; grid evaluation is deterministic, so
    any drift beyond ``match_tol`` means an artifact was altered."""
    problems = []
    for k in _PATH_CERT_FIELDS:
        a, b = getattr(stored, k), getattr(recomputed, k)
        if abs(a - b) > match_tol * max(1.0, abs(a), abs(b)):
            problems.append(f"{k} stored={a!r} recomputed={b!r}")
    if stored.grid != recomputed.grid:
        problems.append(f"grid stored={stored.grid} recomputed="
                        f"{recomputed.grid}")
    if stored.nodes != recomputed.nodes:
        problems.append("node list differs from recomputation")
    if stored.windows != recomputed.windows:
        problems.append("window list differs from recomputation")
    return problems
