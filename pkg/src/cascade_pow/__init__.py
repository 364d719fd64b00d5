"""Evaluate ``(1+z)**A`` for ``|z| >= 1`` as a product of convergent binomial series.

The dyadic cascade rewrites ``(1+z)**A`` as a base factor in ``z/2**m0``
times ``m0`` shifted factors in ``z/(z+2**r)``; each is summed with a
rigorous tail certificate in MPFR/MPC arithmetic.
"""

from .cascade import (
    CascadeFactor,
    CascadePlan,
    EvalReport,
    RegionVerdict,
    build_plan,
    check_region,
    classify_region,
    compute_m0,
    eval_binomial_series,
    eval_cascade,
    eval_xy,
    telescope_residual,
)
from .errors import (
    BranchMismatch,
    CascadeError,
    DomainError,
    NoConvergence,
    OutOfRegion,
    PrecisionMismatch,
    RecursionLimit,
    SingularShift,
    ZeroBase,
    ZeroDenominator,
)
from .numeric_core import Exponent, Scalar, gen_binomial, principal_power
from .oracle import ErrorRecord, GridSpec, compare, direct_pow, profile_convergence, scan_grid
from .series import (
    BCoeffKey,
    TruncatedPowerSeries,
    b_coeff,
    eval_eq8,
    eval_eq9,
    ps_mul,
    recursive_reciprocal_pow,
    shifted_reciprocal_series,
)

__all__ = [
    "BCoeffKey",
    "BranchMismatch",
    "CascadeError",
    "CascadeFactor",
    "CascadePlan",
    "DomainError",
    "ErrorRecord",
    "EvalReport",
    "Exponent",
    "GridSpec",
    "NoConvergence",
    "OutOfRegion",
    "PrecisionMismatch",
    "RecursionLimit",
    "RegionVerdict",
    "Scalar",
    "SingularShift",
    "TruncatedPowerSeries",
    "ZeroBase",
    "ZeroDenominator",
    "b_coeff",
    "build_plan",
    "check_region",
    "classify_region",
    "compare",
    "compute_m0",
    "direct_pow",
    "eval_binomial_series",
    "eval_cascade",
    "eval_eq8",
    "eval_eq9",
    "eval_xy",
    "gen_binomial",
    "principal_power",
    "profile_convergence",
    "ps_mul",
    "recursive_reciprocal_pow",
    "scan_grid",
    "shifted_reciprocal_series",
    "telescope_residual",
]
