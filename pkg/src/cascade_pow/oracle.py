"""Independent reference values and measurement harness.

The reference is always the principal power ``(1+z)**A`` computed directly
from ``exp(A * Log(1+z))`` with :data:`ORACLE_GUARD_DIGITS` extra digits, so
oracle rounding never shows up in a measured error.  Failures of the method
under test are recorded as verdicts rather than raised.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from .cascade import (
    DEFAULT_MAX_TERMS,
    DEFAULT_TOL,
    ORACLE_GUARD_DIGITS,
    classify_region,
    compute_m0,
    eval_cascade,
)
from .errors import (
    BranchMismatch,
    DomainError,
    NoConvergence,
    OutOfRegion,
    RecursionLimit,
    SingularShift,
    ZeroBase,
    ZeroDenominator,
)
from .numeric_core import (
    DEFAULT_PRECISION,
    Exponent,
    Scalar,
    as_exponent,
    as_scalar,
    principal_power,
    working_context,
)
from .series import eval_eq8, eval_eq9

METHODS = ("cascade", "eq8", "eq9")
VERDICTS = ("ok", "out_of_region", "no_convergence", "branch_mismatch", "singular")


@dataclass(frozen=True)
class ErrorRecord:
    """Outcome of one method evaluation against the direct reference.

    ``value`` is ``None`` unless the method returned; ``reference`` is
    ``None`` only where the principal power itself is undefined.  ``rel_err``
    and ``est_rel_error`` are ``None`` for failed evaluations (not NaN, which
    would break record equality).  When ``absolute_only`` is set the
    reference is too small for a relative metric and ``rel_err`` holds the
    absolute error instead.  Wall time does not take part in equality.
    """

    z: Scalar
    A: Exponent
    method_tag: str
    value: Scalar | None
    reference: Scalar | None
    rel_err: float | None
    terms_total: int
    wall_ns: int = field(compare=False)
    verdict: str
    m0: int | None = None
    est_rel_error: float | None = None
    absolute_only: bool = False


@dataclass(frozen=True)
class GridSpec:
    """Closed uniform grid ``re_range x im_range`` evaluated for each ``A``.

    Ranges are ``(min, max, count)``; endpoints are kept as exact fractions
    so grid points land on the intended values.
    """

    re_range: tuple[Fraction, Fraction, int]
    im_range: tuple[Fraction, Fraction, int]
    A_values: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("re_range", "im_range"):
            lo, hi, count = getattr(self, name)
            lo, hi = Fraction(lo), Fraction(hi)
            if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                raise ValueError(f"{name}: count must be a positive integer")
            if lo > hi:
                raise ValueError(f"{name}: min must not exceed max")
            object.__setattr__(self, name, (lo, hi, count))
        if not self.A_values:
            raise ValueError("A_values must not be empty")
        object.__setattr__(self, "A_values", tuple(self.A_values))
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @staticmethod
    def axis(lo: Fraction, hi: Fraction, count: int) -> list[Fraction]:
        if count == 1:
            return [lo]
        step = (hi - lo) / (count - 1)
        return [lo + k * step for k in range(count)]

    def points(self) -> list[tuple[Fraction, Fraction]]:
        res = self.axis(*self.re_range)
        ims = self.axis(*self.im_range)
        return [(x, y) for x in res for y in ims]


def direct_pow(z, A) -> Scalar:
    """Principal ``(1+z)**A`` at the precision of ``z``."""
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    with working_context(z.bits + 8):
        base = Scalar._wrap(1 + z.value, z.precision)
    return principal_power(base, A)


def _floor(precision: int) -> float:
    return 10.0 ** (-precision - 5)


def _measure(value: Scalar, reference: Scalar, precision: int) -> tuple[float, bool]:
    """``(error, absolute_only)`` with the guard-digit floor applied."""
    with working_context(reference.bits):
        ref_abs = abs(reference.value)
        err = abs(value.value - reference.value)
        small = ref_abs < gmpy2.exp10(-precision)
        e = float(err) if small else float(err / ref_abs)
    return max(e, _floor(precision)), small


def _run_method(z: Scalar, A: Exponent, method_tag: str, tol: float, max_terms: int, depth: int | None):
    if method_tag == "cascade":
        return eval_cascade(z, A, tol, max_terms, diagnostics=True)
    if method_tag == "eq8":
        return eval_eq8(z, A, tol, max_terms, diagnostics=True)
    if method_tag == "eq9":
        return eval_eq9(z, A, tol, depth, max_terms, diagnostics=True)
    raise ValueError(f"unknown method {method_tag!r}; expected one of {METHODS}")


def compare(
    z,
    A,
    method_tag: str,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    depth: int | None = None,
) -> ErrorRecord:
    """Run ``method_tag`` at ``z`` and measure it against :func:`direct_pow`.

    Never raises for numerical failures: they become the record's verdict.
    A form whose domain excludes ``z`` (``eq8`` off the annulus ``1<|z|<2``,
    ``eq9`` with ``m0 <= 1``) is reported as ``out_of_region``.
    """
    if method_tag not in METHODS:
        raise ValueError(f"unknown method {method_tag!r}; expected one of {METHODS}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    precision = z.precision
    ref_precision = precision + ORACLE_GUARD_DIGITS
    try:
        reference = direct_pow(Scalar(z.value, ref_precision), Exponent(A.value, ref_precision))
    except ZeroBase:
        reference = None

    m0 = compute_m0(z)
    start = time.perf_counter_ns()
    try:
        report = _run_method(z, A, method_tag, tol, max_terms, depth)
    except (SingularShift, ZeroDenominator, ZeroBase):
        verdict = "singular"
    except (OutOfRegion, DomainError):
        verdict = "out_of_region"
    except (NoConvergence, RecursionLimit):
        verdict = "no_convergence"
    except BranchMismatch:
        verdict = "branch_mismatch"
    else:
        verdict = "ok"
    wall = time.perf_counter_ns() - start

    if verdict != "ok":
        return ErrorRecord(z, A, method_tag, None, reference, None, 0, wall, verdict, m0=m0)
    rel, absolute_only = _measure(report.value, reference, precision)
    return ErrorRecord(
        z,
        A,
        method_tag,
        report.value,
        reference,
        rel,
        report.terms_total,
        wall,
        verdict,
        m0=m0,
        est_rel_error=report.est_rel_error,
        absolute_only=absolute_only,
    )


def profile_convergence(z, A, term_caps: Sequence[int]) -> list[tuple[int, float]]:
    """Error of the cascade truncated to ``cap`` terms per factor, for each cap.

    No tail certificate is applied: every factor sums exactly ``cap`` terms
    (fewer only when a nonnegative integer exponent terminates first).
    """
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    ref_precision = z.precision + ORACLE_GUARD_DIGITS
    reference = direct_pow(Scalar(z.value, ref_precision), Exponent(A.value, ref_precision))
    out = []
    for cap in term_caps:
        if isinstance(cap, bool) or not isinstance(cap, int) or cap < 1:
            raise ValueError(f"term caps must be positive integers, got {cap!r}")
        report = eval_cascade(z, A, fixed_terms=cap)
        rel, _ = _measure(report.value, reference, z.precision)
        out.append((cap, rel))
    return out


def _is_singular(re: Fraction, im: Fraction) -> bool:
    if im != 0:
        return False
    if re == -1:
        return True
    if re >= 0:
        return False
    n = -re
    return n.denominator == 1 and n.numerator >= 2 and n.numerator & (n.numerator - 1) == 0


def _grid_task(args) -> ErrorRecord:
    re, im, A, method_tag, tol, precision, max_terms = args
    z = Scalar((re, im), precision)
    A = Exponent(A, precision)
    if _is_singular(re, im):
        return ErrorRecord(z, A, method_tag, None, None, None, 0, 0, "singular", m0=compute_m0(z))
    return compare(z, A, method_tag, tol, max_terms)


def scan_grid(
    spec: GridSpec,
    method_tag: str = "cascade",
    precision: int = DEFAULT_PRECISION,
    max_terms: int = DEFAULT_MAX_TERMS,
    workers: int | None = None,
) -> list[ErrorRecord]:
    """One :class:`ErrorRecord` per ``(A, re, im)`` grid point, in that order.

    With ``workers > 1`` points are evaluated in a process pool; the
    returned order is the same either way.
    """
    if method_tag not in METHODS:
        raise ValueError(f"unknown method {method_tag!r}; expected one of {METHODS}")
    tasks = [
        (re, im, A, method_tag, spec.tol, precision, max_terms)
        for A in spec.A_values
        for re, im in spec.points()
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_grid_task, tasks, chunksize=8))
    return [_grid_task(t) for t in tasks]


def region_convergent(z) -> bool:
    """Whether the region predicate accepts ``z`` (non-singular and convergent)."""
    return classify_region(z).convergent
