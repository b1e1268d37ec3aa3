"""Explicit factorization of the identity through a fixed square matrix.

Given ``A`` with ``||A|| <= 1`` and columns of norm at least ``theta``, the
pipeline is: pick an almost-orthogonal column family ``F``, form the sparse
right factor ``R`` (normalized coordinate columns) and the left candidate
``L0 = (A R)^T``, then correct ``L = (L0 A R)^{-1} L0`` so that
``L A R = I_n`` exactly, with ``||L|| ||R|| <= 2/theta``.

Every produced pair carries a certificate recomputed from scratch by
``verify_static``; nothing is trusted from producer bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    FormatError,
    HypothesisError,
)
from .linalg import format_real, operator_norm
from .selection import select_almost_orthogonal

__all__ = [
    "FactorPair",
    "StaticCertificate",
    "CorrectionBudget",
    "build_R",
    "build_L",
    "factor_estimates",
    "invert_near_identity",
    "max_rank",
    "static_epsilon",
    "factor_identity",
    "scaled_factor",
    "witness_lower_bound",
    "verify_static",
    "write_certificate",
    "read_certificate",
]

DEFAULT_TOL = 1e-9
_NORM_SLACK = 1e-9


@dataclass(frozen=True)
class FactorPair:
    """Left/right factors with the family that produced them."""

    L: np.ndarray
    R: np.ndarray
    n: int
    F: tuple
    corrected: bool


@dataclass(frozen=True)
class StaticCertificate:
    """Independently recomputed witness that ``L A R = I_n`` within ``tol``
    and ``||L|| ||R||`` is within budget."""

    dev: float
    norm_L: float
    norm_R: float
    product: float
    theta: float
    budget: float
    passed: bool
    F: tuple = ()


@dataclass(frozen=True)
class CorrectionBudget:
    """Deviation bound ``c_dev`` (< 1) and raw norm-product budget carried
    into a correction step; corrected product is ``norm_budget/(1-c_dev)``."""

    c_dev: float
    norm_budget: float

    def __post_init__(self):
        if not 0 <= self.c_dev < 1:
            raise ValueError("c_dev must lie in [0, 1)")


def _column_norms(a, f) -> np.ndarray:
    idx = np.asarray(f, dtype=int)
    if idx.size == 0:
        raise DimensionError("empty family")
    if idx.min() < 0 or idx.max() >= a.shape[1]:
        raise DimensionError("family index out of range")
    return np.linalg.norm(a[:, idx], axis=0)


def build_R(a, f) -> np.ndarray:
    """Right factor: column ``k`` is ``e_{i_k} / ||a_{i_k}||`` for the k-th
    smallest family index."""
    a = np.asarray(a, dtype=float)
    f = tuple(sorted(int(i) for i in f))
    norms = _column_norms(a, f)
    if norms.min() <= 0:
        raise HypothesisError("family contains a zero-norm column")
    r = np.zeros((a.shape[1], len(f)))
    r[list(f), np.arange(len(f))] = 1.0 / norms
    return r


def build_L(a, f) -> np.ndarray:
    """Left candidate ``(A R)^T``; its rows are the normalized family
    columns."""
    a = np.asarray(a, dtype=float)
    return (a @ build_R(a, f)).T


def factor_estimates(a, f):
    """A-priori bounds ``(1/theta, 1 + sqrt(n-1) sqrt(eps)/theta,
    n eps/theta^2)`` on ``||R||``, ``||L0||`` and ``||L0 A R0 - I||``, with
    ``theta``/``eps`` computed over the family columns."""
    a = np.asarray(a, dtype=float)
    f = tuple(sorted(int(i) for i in f))
    norms = _column_norms(a, f)
    theta = float(norms.min())
    if theta <= 0:
        raise HypothesisError("family contains a zero-norm column")
    n = len(f)
    if n == 1:
        eps = 0.0
    else:
        sub = a[:, list(f)]
        gram = sub.T @ sub
        eps = float(np.abs(gram - np.diag(np.diag(gram))).max())
    return (
        1.0 / theta,
        1.0 + np.sqrt((n - 1) * eps) / theta,
        n * eps / theta**2,
    )


def invert_near_identity(s, c_hint: float | None = None) -> np.ndarray:
    """Inverse of a square matrix within distance < 1 of the identity.

    Uses direct elimination with partial pivoting; the Neumann-series bound
    ``||S^{-1}|| <= 1/(1 - ||S - I||)`` still holds for the result and the
    residual is checked to 1e-12.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"expected square matrix, got shape {s.shape}")
    n = s.shape[0]
    eye = np.eye(n)
    c = float(c_hint) if c_hint is not None else operator_norm(s - eye)
    if c >= 1.0:
        raise ConvergenceError(
            f"||S - I|| = {c:g} >= 1: near-identity hypothesis violated"
        )
    inv = np.linalg.solve(s, eye)
    residual = operator_norm(s @ inv - eye)
    if residual > 1e-12:
        raise ConvergenceError(
            f"inversion residual {residual:g} exceeds 1e-12"
        )
    return inv


def max_rank(n_cols: int, theta: float) -> int:
    """Guaranteed factorization rank ``floor(theta^(4/3) N^(1/3) / 5)``;
    0 means the guarantee yields no rank at this size."""
    if not 0 < theta <= 1:
        raise HypothesisError(f"theta={theta:g} must lie in (0, 1]")
    if n_cols < 1:
        raise DimensionError("N must be positive")
    return _rank_floor(n_cols, theta, 5.0)


def _rank_floor(n_cols: int, theta: float, divisor: float) -> int:
    value = theta ** (4.0 / 3.0) * float(n_cols) ** (1.0 / 3.0) / divisor
    nearest = round(value)
    # Snap values that are integers up to fp noise in the cube root.
    if abs(value - nearest) < 1e-9:
        value = nearest
    return max(int(np.floor(value)), 0)


def static_epsilon(theta: float, n: int) -> float:
    """Selection threshold ``theta^2 / (9 (n-1))`` used by the stationary
    driver for ``n >= 2``."""
    if n < 2:
        raise ValueError("defined for n >= 2")
    return theta**2 / (9.0 * (n - 1))


def column_norms(a) -> np.ndarray:
    """Column norms without large temporaries (single fused pass)."""
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def _hypothesis_checks(a, rel_tol: float):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected square matrix, got shape {a.shape}")
    norm = operator_norm(a, rel_tol)
    if norm > 1.0 + _NORM_SLACK:
        raise HypothesisError(
            f"hypothesis (i) failed: ||A|| = {norm:.12g} > 1"
        )
    theta = float(column_norms(a).min())
    if theta <= 0.0:
        raise HypothesisError(
            "hypothesis (ii) failed: some column has norm 0 (theta = 0)"
        )
    return a, theta


def factor_identity(a, n: int | None = None, *, tol: float = DEFAULT_TOL,
                    rel_tol: float = 1e-10, enforce_rank: bool = True):
    """Factor ``I_n`` through ``A``: returns ``(FactorPair, StaticCertificate)``
    with ``L A R = I_n`` within ``tol`` and ``||L|| ||R|| <= 2/theta``.

    ``n=None`` takes the guaranteed rank ``max_rank(N, theta)``.  An explicit
    ``n = 1`` is always accepted (the single-column construction is
    unconditional); larger explicit ``n`` must stay within the guarantee
    unless ``enforce_rank=False``, in which case the worst-case selection
    feasibility guards are relaxed and only the greedy itself can fail.
    """
    a, theta = _hypothesis_checks(a, rel_tol)
    n_cols = a.shape[1]
    nmax = max_rank(n_cols, theta)
    if n is None:
        # The single-column construction needs no counting argument, so the
        # auto rank never drops below 1 once the hypotheses hold.
        n = max(nmax, 1)
    n = int(n)
    if n < 1:
        raise HypothesisError("n must be >= 1")
    if n > 1 and enforce_rank and n > nmax:
        raise HypothesisError(
            f"n={n} exceeds the guaranteed rank {nmax} for N={n_cols}, "
            f"theta={theta:g}"
        )

    if n == 1:
        f = (0,)
        r = build_R(a, f)
        ell = build_L(a, f)
        pair = FactorPair(L=ell, R=r, n=1, F=f, corrected=False)
    else:
        eps = static_epsilon(theta, n)
        f = select_almost_orthogonal(a, n, eps, strict=enforce_rank)
        r = build_R(a, f)
        b = a @ r  # one pass; L0 = (A R)^T and L0 A R = B^T B
        l0 = b.T.copy()
        s = l0 @ b
        ell = invert_near_identity(s) @ l0
        pair = FactorPair(L=ell, R=r, n=n, F=f, corrected=True)
    cert = verify_static(a, pair, theta, tol)
    return pair, cert


def scaled_factor(a, n: int | None = None, *, tol: float = DEFAULT_TOL,
                  rel_tol: float = 1e-10):
    """Variant without the ``||A|| <= 1`` restriction: factors ``A/||A||``
    and rescales, so ``L A R = I_n`` with ``||L|| ||R|| <= 2 ||A|| / theta``."""
    a = np.asarray(a, dtype=float)
    scale = operator_norm(a, rel_tol)
    if scale <= 0.0:
        raise HypothesisError("zero matrix cannot factor the identity")
    pair, _ = factor_identity(a / scale, n, tol=tol, rel_tol=rel_tol)
    scaled = FactorPair(L=pair.L / scale, R=pair.R, n=pair.n, F=pair.F,
                        corrected=pair.corrected)
    theta = float(column_norms(a).min())
    cert = verify_static(a, scaled, theta, tol, budget=2.0 * scale / theta)
    return scaled, cert


def witness_lower_bound(n_cols: int, theta: float) -> np.ndarray:
    """Diagonal witness ``diag(1, theta, ..., theta)``: any valid rank >= 2
    factorization through it has ``||L|| ||R|| >= 1/theta``."""
    if n_cols < 2:
        raise DimensionError("witness needs N >= 2")
    if not 0 < theta <= 1:
        raise HypothesisError(f"theta={theta:g} must lie in (0, 1]")
    d = np.full(n_cols, theta)
    d[0] = 1.0
    return np.diag(d)


def verify_static(a, pair: FactorPair, theta: float, tol: float = DEFAULT_TOL,
                  *, budget: float | None = None) -> StaticCertificate:
    """Recompute the certificate from the factors alone.

    ``dev = ||L A R - I_n||`` and ``product = ||L|| ||R||`` are measured from
    scratch; pass iff ``dev <= tol`` and ``product <= budget + tol`` with the
    default budget ``2/theta``.
    """
    a = np.asarray(a, dtype=float)
    ell, r = np.asarray(pair.L, dtype=float), np.asarray(pair.R, dtype=float)
    n = pair.n
    if ell.shape != (n, a.shape[0]) or r.shape != (a.shape[1], n):
        raise DimensionError(
            f"factor shapes {ell.shape}, {r.shape} inconsistent with "
            f"A {a.shape} and n={n}"
        )
    if theta <= 0:
        raise HypothesisError("theta must be positive")
    if budget is None:
        budget = 2.0 / theta
    dev = operator_norm(ell @ (a @ r) - np.eye(n))
    norm_l = operator_norm(ell)
    norm_r = operator_norm(r)
    product = norm_l * norm_r
    passed = dev <= tol and product <= budget + tol
    return StaticCertificate(dev=dev, norm_L=norm_l, norm_R=norm_r,
                             product=product, theta=float(theta),
                             budget=float(budget), passed=passed, F=pair.F)


_CERT_FIELDS = ("dev", "norm_L", "norm_R", "product", "theta", "budget")


def write_certificate(cert: StaticCertificate, path) -> None:
    """Serialize as flat ``key=value`` text (reals at 17 significant digits,
    family as a comma-separated 0-based index list)."""
    from .linalg import _atomic_write

    lines = [f"{k}={format_real(getattr(cert, k))}" for k in _CERT_FIELDS]
    lines.append(f"pass={1 if cert.passed else 0}")
    lines.append("F=" + ",".join(str(i) for i in cert.F))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_certificate(path) -> StaticCertificate:
    fields = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected key=value", line=lineno)
            key, value = line.split("=", 1)
            fields[key] = value
    try:
        f = tuple(int(i) for i in fields.get("F", "").split(",") if i != "")
        return StaticCertificate(
            dev=float(fields["dev"]),
            norm_L=float(fields["norm_L"]),
            norm_R=float(fields["norm_R"]),
            product=float(fields["product"]),
            theta=float(fields["theta"]),
            budget=float(fields["budget"]),
            passed=fields["pass"] == "1",
            F=f,
        )
    except KeyError as exc:
        raise FormatError(f"missing certificate field {exc}") from None
    except ValueError as exc:
        raise FormatError(f"bad certificate value: {exc}") from None


def check_certificate_match(stored: StaticCertificate,
                            recomputed: StaticCertificate,
                            match_tol: float = 1e-12) -> list[str]:
    """Field-by-field agreement between a stored certificate and a fresh
    recomputation; production is deterministic, so disagreement beyond
    ``match_tol`` means an artifact was altered."""
    problems = []
    for k in _CERT_FIELDS:
        a, b = getattr(stored, k), getattr(recomputed, k)
        if abs(a - b) > match_tol * max(1.0, abs(a), abs(b)):
            problems.append(f"{k} stored={a!r} recomputed={b!r}")
    if stored.F != recomputed.F:
        problems.append(f"family stored={stored.F} recomputed={recomputed.F}")
    return problems
