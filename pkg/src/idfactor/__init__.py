"""idfactor: constructive factorization of the identity matrix.

Factors ``I_n`` through a square matrix ``A`` with large-norm columns
(``L A R = I_n`` with ``||L|| ||R|| <= 2/theta``), statically and
continuously along a piecewise-linear matrix path, with every guarantee
independently recomputable from the emitted artifacts.
"""

from .errors import (
    ConvergenceError,
    DimensionError,
    ExhaustionError,
    FormatError,
    HypothesisError,
    IdFactorError,
    InfeasibleError,
    StallError,
    VerificationError,
)
from .linalg import (
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
from .selection import (
    big_inner_set,
    select_almost_orthogonal,
    select_disjoint_extension,
)
from .static import (
    CorrectionBudget,
    FactorPair,
    StaticCertificate,
    build_L,
    build_R,
    factor_estimates,
    factor_identity,
    invert_near_identity,
    max_rank,
    scaled_factor,
    static_epsilon,
    verify_static,
    witness_lower_bound,
)
from .paths import (
    MatrixPath,
    SegmentExtrema,
    parse_path,
    path_norm_bound,
    path_theta,
    segment_inner_extrema,
    segment_min_colnorm,
    write_path,
)
from .continuous import (
    CoverPlan,
    FactorPath,
    PathCertificate,
    blend_L,
    blend_R,
    blend_estimates,
    build_bridges,
    build_cover,
    continuous_epsilon,
    continuous_max_rank,
    corrected_factor_at,
    factor_path,
    raw_factor_at,
    recertify_plan,
    stitch_discrepancy,
    verify_path,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DimensionError", "ExhaustionError", "FormatError",
    "HypothesisError", "IdFactorError", "InfeasibleError", "StallError",
    "VerificationError",
    "GramStats", "gram_deviation_bound", "gram_stats", "inner",
    "norm_bound_entries", "norm_bound_gram", "operator_norm",
    "read_matrix", "write_matrix",
    "big_inner_set", "select_almost_orthogonal", "select_disjoint_extension",
    "CorrectionBudget", "FactorPair", "StaticCertificate", "build_L",
    "build_R", "factor_estimates", "factor_identity", "invert_near_identity",
    "max_rank", "scaled_factor", "static_epsilon", "verify_static",
    "witness_lower_bound",
    "MatrixPath", "SegmentExtrema", "parse_path", "path_norm_bound",
    "path_theta", "segment_inner_extrema", "segment_min_colnorm",
    "write_path",
    "CoverPlan", "FactorPath", "PathCertificate", "blend_L", "blend_R",
    "blend_estimates", "build_bridges", "build_cover", "continuous_epsilon",
    "continuous_max_rank", "corrected_factor_at", "factor_path",
    "raw_factor_at", "recertify_plan", "stitch_discrepancy", "verify_path",
]
