"""Dyadic cascade factorization of ``(1+z)**A`` for ``|z| >= 1``.

With ``m0`` the smallest integer such that ``|z| / 2**m0 < 1``,

    (1+z)**A = (1 + z/2**m0)**A * prod_{r=1..m0} (1 + z/(z + 2**r))**A

and each factor is a binomial series in an argument of modulus below one
whenever ``Re z > -1``.  Every factor is summed until a rigorous ratio-test
tail certificate drops below its share of the requested relative tolerance.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import (
    BranchMismatch,
    DomainError,
    NoConvergence,
    OutOfRegion,
    SingularShift,
    ZeroDenominator,
)
from .numeric_core import (
    GUARD_BITS,
    Exponent,
    Scalar,
    as_exponent,
    as_scalar,
    precision_bits,
    scale2,
    principal_power_raw,
    working_context,
)

DEFAULT_TOL = 1e-30
DEFAULT_MAX_TERMS = 10_000
# hard ceiling for adaptive precision escalation
MAX_BITS = 40_000
# extra decimal digits used by reference (oracle) computations
ORACLE_GUARD_DIGITS = 10


@dataclass(frozen=True)
class CascadeFactor:
    kind: str  # "base" or "shifted"
    r: int | None
    argument: Scalar


@dataclass(frozen=True)
class CascadePlan:
    z: Scalar
    A: Exponent
    m0: int
    factors: tuple[CascadeFactor, ...]


@dataclass(frozen=True)
class RegionVerdict:
    convergent: bool
    failing_shifts: tuple[int, ...] = ()
    singular_shift: int | None = None


@dataclass(frozen=True)
class EvalReport:
    value: Scalar
    per_factor_terms: tuple[int, ...]
    est_rel_error: float
    method_tag: str
    m0: int
    oracle_ratio: Scalar | None = field(default=None)

    @property
    def terms_total(self) -> int:
        return sum(self.per_factor_terms)


# --------------------------------------------------------------------------
# planning and region checks (exact rational arithmetic)


def _exact_parts(z: Scalar) -> tuple[Fraction, Fraction]:
    if not z.is_finite():
        raise ValueError("z must be finite")
    return z.as_fractions()


def _m0_exact(re: Fraction, im: Fraction) -> int:
    n2 = re * re + im * im
    m = 0
    while n2 >= 4**m:
        m += 1
    return m


def compute_m0(z) -> int:
    """Smallest ``m >= 0`` with ``|z| / 2**m < 1`` (strict)."""
    z = as_scalar(z)
    return _m0_exact(*_exact_parts(z))


def m0_raw(z) -> int:
    """:func:`compute_m0` for a raw ``gmpy2.mpc``."""
    re = Fraction(*(int(v) for v in z.real.as_integer_ratio()))
    im = Fraction(*(int(v) for v in z.imag.as_integer_ratio()))
    return _m0_exact(re, im)


def _singular_shift(re: Fraction, im: Fraction, m0: int) -> int | None:
    if im != 0 or re >= 0:
        return None
    for r in range(1, m0 + 1):
        if re == -(2**r):
            return r
    return None


def _failing_shifts(re: Fraction, m0: int) -> tuple[int, ...]:
    # |z| >= |z + 2^r|  <=>  2^(r+1) Re z + 4^r <= 0
    return tuple(r for r in range(1, m0 + 1) if 2 ** (r + 1) * re + 4**r <= 0)


def classify_region(z) -> RegionVerdict:
    """Region verdict for ``z`` without raising on singular shifts."""
    z = as_scalar(z)
    re, im = _exact_parts(z)
    m0 = _m0_exact(re, im)
    singular = _singular_shift(re, im, m0)
    failing = _failing_shifts(re, m0)
    return RegionVerdict(
        convergent=not failing and singular is None,
        failing_shifts=failing,
        singular_shift=singular,
    )


def build_plan(z, A) -> CascadePlan:
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    re, im = _exact_parts(z)
    m0 = _m0_exact(re, im)
    singular = _singular_shift(re, im, m0)
    if singular is not None:
        raise SingularShift(singular)
    with working_context(z.bits):
        factors = [CascadeFactor("base", None, Scalar._wrap(scale2(z.value, -m0), z.precision))]
        for r in range(1, m0 + 1):
            w = z.value / (z.value + 2**r)
            factors.append(CascadeFactor("shifted", r, Scalar._wrap(w, z.precision)))
    return CascadePlan(z=z, A=A, m0=m0, factors=tuple(factors))


def check_region(plan: CascadePlan) -> RegionVerdict:
    """List every shift ``r`` whose factor argument has modulus >= 1."""
    re, _ = _exact_parts(plan.z)
    failing = _failing_shifts(re, plan.m0)
    return RegionVerdict(convergent=not failing, failing_shifts=failing)


# --------------------------------------------------------------------------
# certified binomial series


def _sum_binomial(w, a, a_abs, stop_at, tol, max_terms, fixed_terms, bits):
    """One pass of the binomial series at ``bits``.

    Returns ``(sum, terms, tail_bound, abs_sum)``.  ``stop_at`` is the last
    index for a terminating exponent, else None.
    """
    with working_context(bits):
        w = mpc(w)
        w_abs = float(abs(w))
        s = mpc(1)
        t = mpc(1)
        abs_sum = mpfr(1)
        tail = mpfr(0)
        n = 0
        while True:
            if stop_at is not None and n >= stop_at:
                break
            if fixed_terms is not None and n + 1 >= fixed_terms:
                break
            t_next = t * w * (a - n) / (n + 1)
            if fixed_terms is None and n >= a_abs:
                rho = w_abs * (1.0 + (a_abs + 1.0) / (n + 1))
                if rho < 1.0:
                    if gmpy2.norm(t_next) <= (tol * (1.0 - rho)) ** 2 * gmpy2.norm(s):
                        tail = abs(t_next) / (1.0 - rho)
                        break
            if n + 1 >= max_terms:
                raise NoConvergence(n + 1)
            s += t_next
            abs_sum += abs(t_next)
            t = t_next
            n += 1
    return s, n + 1, tail, abs_sum


def _escalate(bits, work_bits, terms, abs_sum, s_abs, tol=1.0):
    """New width if accumulated rounding could exceed ``min(2**-work_bits, tol)``
    relative to the sum, else None."""
    if s_abs == 0:
        return None
    rounding = terms * abs_sum * 2.0 ** (1 - bits)
    target = min(2.0 ** (-work_bits - 8), tol / 16)
    budget = s_abs * target
    if rounding <= budget:
        return None
    extra = math.ceil(math.log2(float(rounding / budget))) + 16
    new_bits = bits + extra
    if new_bits > MAX_BITS:
        raise NoConvergence(terms)
    return new_bits


def _tol_bits(tol: float, work_bits: int) -> int:
    """Extra bits when ``tol`` asks for more than working precision."""
    return max(0, math.ceil(-math.log2(tol)) - work_bits)


def _cancellation_bits(w_abs: float, a: float, one_plus_w_abs: float) -> int:
    """A-priori bits lost to cancellation when summing the binomial series."""
    if a >= 0 or w_abs <= 0 or w_abs >= 1.0:
        return 0
    one_plus_w_abs = max(one_plus_w_abs, 1e-300)
    lost = -a * (math.log2(one_plus_w_abs) - math.log2(1.0 - w_abs))
    return max(0, math.ceil(lost))


def binomial_series_raw(w, a, tol, max_terms, work_bits, fixed_terms=None):
    """Certified ``sum C(a,n) w**n`` on raw gmpy2 values.

    Precision starts at ``work_bits + GUARD_BITS`` plus the predicted
    cancellation loss and is raised until rounding is below working
    precision.  Returns ``(sum, terms, tail_bound)``; the sum carries the
    final (possibly escalated) width.
    """
    a = mpfr(a, work_bits + GUARD_BITS)
    a_abs = abs(float(a))
    stop_at = int(a) if (gmpy2.is_integer(a) and a >= 0) else None
    if w == 0:
        return mpc(1), 1, mpfr(0)
    with working_context(work_bits + GUARD_BITS):
        w_abs_mp = abs(w)
    if w_abs_mp >= 1:
        raise DomainError(f"|w| = {float(w_abs_mp)} is not below 1")
    w_abs = float(w_abs_mp)
    bits = work_bits + GUARD_BITS + _tol_bits(tol, work_bits)
    if stop_at is None:
        bits += _cancellation_bits(w_abs, float(a), abs(1 + complex(w)))
    while True:
        s, terms, tail, abs_sum = _sum_binomial(w, a, a_abs, stop_at, tol, max_terms, fixed_terms, bits)
        new_bits = _escalate(bits, work_bits, terms, abs_sum, abs(s), tol)
        if new_bits is None:
            return s, terms, tail
        bits = new_bits


def eval_binomial_series(w, A, tol: float = DEFAULT_TOL, max_terms: int = DEFAULT_MAX_TERMS):
    """Sum the binomial series of ``(1+w)**A`` to relative tolerance ``tol``.

    Returns ``(value, terms_used, tail_bound)``, where ``tail_bound`` is the
    absolute certificate on the discarded remainder (0 when ``A`` is a
    nonnegative integer and the series terminates).
    """
    w = as_scalar(w)
    A = as_exponent(A, w.precision)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    with working_context(w.bits + 8):
        if abs(w.value) >= 1:
            raise DomainError("binomial series requires |w| < 1")
    s, terms, tail = binomial_series_raw(w.value, A.value, tol, max_terms, w.bits)
    return Scalar._wrap(s, w.precision), terms, float(tail)


# --------------------------------------------------------------------------
# evaluation paths


def rel_tail(tail, s) -> float:
    """Relative error bound of a partial sum ``s`` whose tail is ``tail``."""
    if tail == 0:
        return 0.0
    s_abs = abs(s)
    if tail >= s_abs:
        return math.inf
    return float(tail / (s_abs - tail))


def oracle_bits(precision: int) -> int:
    return precision_bits(precision + ORACLE_GUARD_DIGITS)


def with_oracle(report: EvalReport, base, A: Exponent, tol: float) -> EvalReport:
    """Attach ``value / principal_power(base, A)``; raise on a pure phase error."""
    precision = report.value.precision
    bits = oracle_bits(precision)
    ref = principal_power_raw(base, A.value, bits)
    with working_context(bits):
        ratio = report.value.value / ref
        off = float(abs(ratio - 1))
        mod_off = float(abs(abs(ratio) - 1))
    if off > 10 * tol and mod_off <= 10 * tol:
        raise BranchMismatch(Scalar._wrap(ratio, precision))
    return dataclasses.replace(report, oracle_ratio=Scalar._wrap(ratio, precision))


def _require_region(z: Scalar, A: Exponent) -> CascadePlan:
    plan = build_plan(z, A)
    verdict = check_region(plan)
    if not verdict.convergent:
        raise OutOfRegion(verdict)
    return plan


def eval_cascade(
    z,
    A,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    diagnostics: bool = False,
    fixed_terms: int | None = None,
) -> EvalReport:
    """Evaluate ``(1+z)**A`` as the product of the cascade's binomial series.

    Each factor runs at relative tolerance ``tol / (2*(m0+1))``.  With
    ``fixed_terms`` set, every factor sums exactly that many terms (fewer for
    a terminating exponent) and no certificate is applied; the reported
    error estimate is then ``inf``.
    """
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    if tol <= 0:
        raise ValueError("tol must be positive")
    plan = _require_region(z, A)
    m0 = plan.m0
    factor_tol = tol / (2 * (m0 + 1))
    work = z.bits
    bits = work + GUARD_BITS
    with working_context(bits):
        args = [scale2(z.value, -m0)]
        args += [z.value / (z.value + 2**r) for r in range(1, m0 + 1)]

    product = mpc(1, precision=bits)
    terms = []
    est = 0.0
    for w in args:
        with working_context(bits):
            saturated = abs(w) >= 1
        if saturated:
            # in the region, yet |w| rounds to 1: the series would need far
            # more terms than any finite budget
            raise NoConvergence(max_terms)
        s, n, tail = binomial_series_raw(w, A.value, factor_tol, max_terms, work, fixed_terms)
        with working_context(bits):
            product = product * s
        terms.append(n)
        truncated = fixed_terms is not None and not (A.terminating and fixed_terms > int(A))
        est += math.inf if truncated else rel_tail(tail, s)

    report = EvalReport(
        value=Scalar._wrap(product, z.precision),
        per_factor_terms=tuple(terms),
        est_rel_error=est,
        method_tag="cascade",
        m0=m0,
    )
    if diagnostics:
        with working_context(oracle_bits(z.precision)):
            base = 1 + z.value
        report = with_oracle(report, base, A, tol)
    return report


def telescope_residual(z, r: int) -> Scalar:
    """``(1 + z/2**(r-1)) - (1 + z/2**r) * (1 + z/(z + 2**r))`` at working precision."""
    z = as_scalar(z)
    if r < 1:
        raise ValueError("r must be >= 1")
    re, im = _exact_parts(z)
    if im == 0 and re == -(2**r):
        raise SingularShift(r)
    with working_context(z.bits):
        v = z.value
        lhs = 1 + scale2(v, -(r - 1))
        rhs = (1 + scale2(v, -r)) * (1 + v / (v + 2**r))
        return Scalar._wrap(lhs - rhs, z.precision)


def eval_xy(
    x,
    y,
    A,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    diagnostics: bool = False,
) -> EvalReport:
    """``(x+y)**A`` as ``y**A * (1 + x/y)**A`` with the cascade for the second factor."""
    x = as_scalar(x)
    y = as_scalar(y, x.precision)
    if x.precision != y.precision:
        # routed through Scalar arithmetic so the mismatch error is uniform
        x + y
    A = as_exponent(A, x.precision)
    if y.is_zero():
        raise ZeroDenominator("y must be nonzero")
    z = x / y
    report = eval_cascade(z, A, tol, max_terms)
    bits = x.bits + GUARD_BITS
    y_pow = principal_power_raw(y.value, A.value, bits)
    with working_context(bits):
        value = y_pow * report.value.value
    report = dataclasses.replace(report, value=Scalar._wrap(value, x.precision), method_tag="xy")
    if diagnostics:
        with working_context(oracle_bits(x.precision)):
            base = x.value + y.value
        report = with_oracle(report, base, A, tol)
    return report
