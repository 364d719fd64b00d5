"""Taylor expansions of shifted reciprocal powers and the iterated-sum evaluators.

``(z + 2**r)**(-m) = sum_j b(j, r, m) z**j`` with

    b(j, r, m) = C(m+j-1, j) * (-1)**j / 2**(r*(m+j))

is used to expand each shifted cascade factor.  The double sums

    sum_m C(A, m) z**m sum_j b(j, r, m) z**j

are evaluated as iterated sums: for every ``m`` the inner ``j`` sum is driven
to its own tolerance before the outer sum moves on.  Rearranging into a
single power series in ``z`` would diverge for ``|z| > 1`` because
``(1 + z/(z+2))**A`` has a branch point at ``z = -1``.

Shifts with ``|z| >= 2**r`` have no convergent Taylor expansion about 0; for
those, ``(z + 2**r)**(-m) = 2**(-r*m) (1 + z/2**r)**(-m)`` is expanded again
by the same machinery with ``z -> z/2**r`` and ``A -> -m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpc, mpfr

from .cascade import (
    DEFAULT_MAX_TERMS,
    DEFAULT_TOL,
    EvalReport,
    RegionVerdict,
    _escalate,
    _tol_bits,
    binomial_series_raw,
    classify_region,
    compute_m0,
    m0_raw,
    oracle_bits,
    rel_tail,
    with_oracle,
)
from .errors import (
    DomainError,
    NoConvergence,
    OutOfRegion,
    RecursionLimit,
    SingularShift,
)
from .numeric_core import (
    DEFAULT_PRECISION,
    GUARD_BITS,
    Scalar,
    as_exponent,
    as_scalar,
    scale2,
    working_context,
)


@dataclass(frozen=True)
class TruncatedPowerSeries:
    """Coefficients ``c[0..order]`` of a power series truncated after ``z**order``."""

    coeffs: tuple[Scalar, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("a truncated series needs at least one coefficient")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        precisions = {c.precision for c in self.coeffs}
        if len(precisions) != 1:
            raise ValueError("all coefficients must share one precision")

    @classmethod
    def from_values(cls, values, precision: int = DEFAULT_PRECISION) -> TruncatedPowerSeries:
        return cls(tuple(as_scalar(v, precision) if not isinstance(v, Scalar) else v for v in values))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def precision(self) -> int:
        return self.coeffs[0].precision

    def __getitem__(self, k: int) -> Scalar:
        return self.coeffs[k]

    def __len__(self) -> int:
        return len(self.coeffs)

    def truncate(self, order: int) -> TruncatedPowerSeries:
        if order > self.order:
            zero = Scalar(0, self.precision)
            return TruncatedPowerSeries(self.coeffs + (zero,) * (order - self.order))
        return TruncatedPowerSeries(self.coeffs[: order + 1])

    def __call__(self, z) -> Scalar:
        """Horner evaluation of the truncated polynomial at ``z``."""
        z = as_scalar(z, self.precision)
        with working_context(z.bits + GUARD_BITS):
            acc = mpc(0)
            for c in reversed(self.coeffs):
                acc = acc * z.value + c.value
        return Scalar._wrap(acc, self.precision)

    def __mul__(self, other: TruncatedPowerSeries) -> TruncatedPowerSeries:
        return ps_mul(self, other, min(self.order, other.order))


def ps_mul(a: TruncatedPowerSeries, b: TruncatedPowerSeries, order: int) -> TruncatedPowerSeries:
    """Cauchy product of two truncated series, kept through ``z**order``."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > a.order + b.order:
        raise ValueError(f"order {order} exceeds a.order + b.order = {a.order + b.order}")
    if a.precision != b.precision:
        a.coeffs[0] + b.coeffs[0]  # raises PrecisionMismatch
    precision = a.precision
    with working_context(a.coeffs[0].bits + GUARD_BITS):
        out = []
        for k in range(order + 1):
            acc = mpc(0)
            for i in range(max(0, k - b.order), min(k, a.order) + 1):
                acc += a.coeffs[i].value * b.coeffs[k - i].value
            out.append(Scalar._wrap(acc, precision))
    return TruncatedPowerSeries(tuple(out))


@dataclass(frozen=True)
class BCoeffKey:
    j: int
    r: int
    m: int

    def __post_init__(self):
        if self.j < 0 or self.m < 0:
            raise ValueError("j and m must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be >= 1")


def b_coeff_exact(j: int, r: int, m: int) -> Fraction:
    """Exact rational ``b(j, r, m)``; ``m == 0`` gives the constant series 1."""
    BCoeffKey(j, r, m)
    if m == 0:
        return Fraction(1 if j == 0 else 0)
    sign = -1 if j % 2 else 1
    return Fraction(sign * math.comb(m + j - 1, j), 2 ** (r * (m + j)))


@lru_cache(maxsize=256)
def _b_row(r: int, m: int, J: int) -> tuple[Fraction, ...]:
    return tuple(b_coeff_exact(j, r, m) for j in range(J + 1))


def b_coeff(key: BCoeffKey, precision: int = DEFAULT_PRECISION) -> Scalar:
    """``b(j, r, m)`` rounded once to ``precision`` digits."""
    if not isinstance(key, BCoeffKey):
        key = BCoeffKey(*key)
    return Scalar(b_coeff_exact(key.j, key.r, key.m), precision)


def shifted_reciprocal_series(r: int, m: int, J: int, precision: int = DEFAULT_PRECISION) -> TruncatedPowerSeries:
    """Taylor coefficients of ``(z + 2**r)**(-m)`` about 0 through ``z**J``."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    BCoeffKey(0, r, m)
    return TruncatedPowerSeries(tuple(Scalar(b, precision) for b in _b_row(r, m, J)))


# --------------------------------------------------------------------------
# iterated-sum machinery on raw gmpy2 values


# memo entries are computed this much tighter than requested, since later
# requests for the same key (escalation reruns, sibling groups) tend to ask
# for slightly more accuracy
_MEMO_MARGIN = 2.0**-8


@dataclass
class _Workspace:
    """Per-evaluation state: widths, limits and memo tables.

    Memo entries store the achieved relative error bound and are reused only
    when that bound already meets the new request.
    """

    work_bits: int
    max_terms: int
    bsums: dict = field(default_factory=dict)
    recips: dict = field(default_factory=dict)


def _bsum_pass(z, r, m, rel_tol, q, max_terms, bits):
    # b(j,r,m) z^j == 2^(-r m) * C(m+j-1, j) * (-z/2^r)^j exactly, so the
    # power-of-two scale is applied once at the end.  ``tm`` tracks |t|
    # by a real recurrence, avoiding a complex modulus per term.
    with working_context(bits):
        u = -scale2(mpc(z), -r)
        u_abs = abs(u)
        s = mpc(1)
        abs_sum = mpfr(1)
        t = mpc(1)
        tm = mpfr(1)
        tail = mpfr(0)
        j = 0
        while True:
            ratio = mpfr(m + j) / (j + 1)
            t = t * u * ratio
            tm = tm * u_abs * ratio
            rho = q * (1.0 + (m + 1.0) / (j + 1))
            if rho < 1.0 and j % 8 == 0 and tm <= rel_tol * (1.0 - rho) * abs(s):
                tail = tm / (1.0 - rho)
                break
            if j + 2 > max_terms:
                raise NoConvergence(j + 1)
            s += t
            abs_sum += tm
            j += 1
        scale = -r * m
        s = scale2(s, scale)
        tail = scale2(tail, scale)
        abs_sum = scale2(abs_sum, scale)
    return s, j + 1, tail, abs_sum


def _bsum(ws: _Workspace, z, r: int, m: int, rel_tol: float):
    """``sum_j b(j, r, m) z**j`` (equal to ``(z + 2**r)**(-m)``) for ``|z| < 2**r``."""
    if m == 0:
        return mpc(1), 1, 0.0
    key = (z, r, m)
    hit = ws.bsums.get(key)
    if hit is not None and hit[2] <= rel_tol:
        return hit
    rel_tol *= _MEMO_MARGIN
    with working_context(ws.work_bits):
        z_abs = float(abs(z))
        shifted_abs = float(abs(z + 2**r))
    q = z_abs / 2**r
    if q >= 1.0:
        # callers check |z| < 2**r exactly; q only rounds up to 1 when the
        # series would need an astronomically long run
        raise NoConvergence(ws.max_terms)
    bits = ws.work_bits + GUARD_BITS + _tol_bits(rel_tol, ws.work_bits)
    if z_abs > 0:
        lost = m * (math.log2(shifted_abs) - math.log2(2**r - z_abs))
        bits += max(0, math.ceil(lost))
    while True:
        s, terms, tail, abs_sum = _bsum_pass(z, r, m, rel_tol, q, ws.max_terms, bits)
        new_bits = _escalate(bits, ws.work_bits, terms, abs_sum, abs(s), rel_tol)
        if new_bits is None:
            break
        bits = new_bits
    out = (s, terms, rel_tail(tail, s))
    ws.bsums[key] = out
    return out


def _outer_horizon(w_abs, a, a_abs, stop_at, tol_tail, log_s, max_terms):
    """Float pre-pass over the outer magnitudes ``|C(a, m)| w**m``.

    Returns the number of terms the certificate will need, the largest
    log-magnitude, and ``log(sum_m m |C(a, m)| w**m)`` (``-inf`` if empty).
    """
    log_w = math.log(w_abs)
    log_c = 0.0
    peak = 0.0
    weighted = -math.inf
    m = 0
    while True:
        log_mag = log_c + m * log_w
        peak = max(peak, log_mag)
        if m:
            weighted = _logaddexp(weighted, math.log(m) + log_mag)
        if stop_at is not None and m >= stop_at:
            return m, peak, weighted
        step = abs(a - m)
        if step == 0:
            return m, peak, weighted
        log_next = log_c + math.log(step) - math.log(m + 1)
        if m >= a_abs:
            rho = w_abs * (1.0 + (a_abs + 1.0) / (m + 1))
            if rho < 1.0 and log_next + (m + 1) * log_w - math.log1p(-rho) <= math.log(tol_tail) + log_s:
                return m, peak, weighted
        if m + 1 >= max_terms:
            raise NoConvergence(m + 1)
        log_c = log_next
        m += 1


def _logaddexp(x, y):
    if x < y:
        x, y = y, x
    if y == -math.inf:
        return x
    return x + math.log1p(math.exp(y - x))


def _group(ws: _Workspace, z, a, r: int, tol_g: float, depth: int):
    """``sum_m C(a, m) z**m (z + 2**r)**(-m)`` as an iterated sum.

    The inner reciprocal powers come from the b-coefficient series when
    ``|z| < 2**r``.  Otherwise ``(z + 2**r)**-1`` is expanded recursively
    once and its powers are formed by repeated multiplication, so a
    relative error ``d`` in the reciprocal becomes at most
    ``(1+d)**m - 1`` in the m-th power.  Half of ``tol_g`` goes to the
    outer tail certificate, half to the inner sums.
    Returns ``(value, terms, rel_error_bound)``.
    """
    work = ws.work_bits
    with working_context(work + GUARD_BITS):
        z = mpc(z)
        shifted = z + 2**r
        w_abs_mp = abs(z) / abs(shifted)
        a = mpfr(a)
    w_abs = float(w_abs_mp)
    if w_abs >= 1.0:
        raise OutOfRegion(RegionVerdict(False, (r,)))
    if z == 0:
        return mpc(1), 1, 0.0
    use_bsum = m0_raw(z) <= r
    af = float(a)
    a_abs = abs(af)
    stop_at = int(a) if (gmpy2.is_integer(a) and a >= 0) else None
    wc = complex(z) / complex(shifted)
    log_s = af * math.log(abs(1 + wc))
    tol_tail = tol_g / 2
    tol_inner = tol_g / 2
    horizon, peak, weighted = _outer_horizon(
        w_abs, af, a_abs, stop_at, tol_tail, log_s, ws.max_terms
    )
    per_term = tol_inner / (horizon + 1)
    if not use_bsum:
        # one reciprocal serves every m; its error is amplified by m
        d1 = tol_inner * math.exp(min(0.0, log_s - weighted)) if weighted > -math.inf else 0.5
        d1 = min(d1, 0.1 / (horizon + 1))
        recip, n_recip, rel_recip = _recip_pow(ws, z, r, 1, d1, depth)
    bits = work + GUARD_BITS + _tol_bits(tol_g, work)
    bits += max(0, math.ceil((peak - log_s) / math.log(2)))
    bits += max(1, horizon).bit_length()

    while True:
        with working_context(bits):
            s_est = gmpy2.exp(mpfr(log_s))
            c = mpfr(1)
            zp = mpc(1)
            wpow = mpfr(1)
            s = mpc(0)
            abs_sum = mpfr(0)
            inner_abs = mpfr(0)
            tail = mpfr(0)
            terms = 0 if use_bsum else n_recip
            rp = mpc(1)
            m = 0
            while True:
                mag = abs(c) * wpow
                if use_bsum:
                    delta = per_term if mag <= s_est else per_term * float(s_est / mag)
                    val, n_in, rel_in = _bsum(ws, z, r, m, min(delta, 0.5))
                else:
                    val, n_in = rp, 0
                    rel_in = math.expm1(m * math.log1p(rel_recip)) if m else 0.0
                    rp = rp * recip
                term = c * zp * val
                s += term
                abs_sum += abs(term)
                inner_abs += mag * rel_in
                terms += n_in
                if stop_at is not None and m >= stop_at:
                    break
                c_next = c * (a - m) / (m + 1)
                if c_next == 0:
                    break
                if m >= a_abs:
                    rho = w_abs * (1.0 + (a_abs + 1.0) / (m + 1))
                    if rho < 1.0:
                        bound = abs(c_next) * wpow * w_abs_mp / (1.0 - rho)
                        if bound <= tol_tail * abs(s):
                            tail = bound
                            break
                if m + 1 >= ws.max_terms:
                    raise NoConvergence(m + 1)
                c = c_next
                zp = zp * z
                wpow = wpow * w_abs_mp
                m += 1
        new_bits = _escalate(bits, work, m + 1, abs_sum, abs(s), tol_g)
        if new_bits is None:
            break
        bits = new_bits
    with working_context(bits):
        s_abs = abs(s)
        rel = rel_tail(tail, s) + float(inner_abs / s_abs)
    return s, terms, rel


def _recip_pow(ws: _Workspace, z, r: int, m: int, rel_tol: float, depth: int):
    """``(z + 2**r)**(-m)`` via ``2**(-r*m) (1 + z/2**r)**(-m)`` expanded recursively."""
    if m == 0:
        return mpc(1), 1, 0.0
    u = scale2(z, -r)
    key = (u, m)
    hit = ws.recips.get(key)
    if hit is None or hit[2] > rel_tol:
        rel_tol *= _MEMO_MARGIN
        m0u = m0_raw(u)
        a = -m
        if m0u == 0:
            s, n, tail = binomial_series_raw(u, a, rel_tol, ws.max_terms, ws.work_bits)
            hit = (s, n, rel_tail(tail, s))
        elif m0u == 1:
            s, n, rel = _eq8_core(ws, u, a, rel_tol)
            hit = (s, sum(n), rel)
        else:
            if depth < 1:
                raise RecursionLimit(f"depth exhausted expanding (1 + z/2^{r})^-{m}")
            s, n, rel = _eq9_core(ws, u, a, rel_tol, depth - 1)
            hit = (s, sum(n), rel)
        ws.recips[key] = hit
    s, n, rel = hit
    return scale2(s, -r * m), n, rel


def _eq8_core(ws: _Workspace, z, a, tol: float):
    """``(1+z)**a`` for ``1 <= |z| < 2`` as base series times the b-coefficient group."""
    work = ws.work_bits
    half = scale2(z, -1)
    base, n_base, tail = binomial_series_raw(half, a, tol / 4, ws.max_terms, work)
    group, n_group, rel_group = _group(ws, z, a, 1, tol / 2, 0)
    with working_context(work + GUARD_BITS + _tol_bits(tol, work)):
        value = base * group
    return value, (n_base, n_group), rel_tail(tail, base) + rel_group


def _eq9_core(ws: _Workspace, z, a, tol: float, depth: int):
    """``(1+z)**a`` for ``m0 >= 2``: base series, the ``r = m0`` b-coefficient
    group and recursively expanded groups ``r = 1 .. m0-1``."""
    work = ws.work_bits
    m0 = m0_raw(z)
    share = tol / (2 * (m0 + 1))
    prod_bits = work + GUARD_BITS + _tol_bits(tol, work)
    scaled = scale2(z, -m0)
    base, n_base, tail = binomial_series_raw(scaled, a, share, ws.max_terms, work)
    value = base
    terms = [n_base]
    rel = rel_tail(tail, base)
    for r in [m0] + list(range(1, m0)):
        g, n, rel_g = _group(ws, z, a, r, share, depth)
        with working_context(prod_bits):
            value = value * g
        terms.append(n)
        rel += rel_g
    return value, tuple(terms), rel


# --------------------------------------------------------------------------
# public evaluators


def _finish(z: Scalar, A, value, terms, rel, tag: str, m0: int, tol: float, diagnostics: bool) -> EvalReport:
    report = EvalReport(
        value=Scalar._wrap(value, z.precision),
        per_factor_terms=tuple(terms),
        est_rel_error=rel,
        method_tag=tag,
        m0=m0,
    )
    if diagnostics:
        with working_context(oracle_bits(z.precision)):
            base = 1 + z.value
        report = with_oracle(report, base, A, tol)
    return report


def eval_eq8(
    z,
    A,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    diagnostics: bool = False,
) -> EvalReport:
    """``(1+z)**A`` for ``1 < |z| < 2`` from the base series in ``z/2`` and
    the iterated b-coefficient double sum for the ``r = 1`` factor."""
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    if tol <= 0:
        raise ValueError("tol must be positive")
    re, im = z.as_fractions()
    n2 = re * re + im * im
    if not 1 < n2 < 4:
        raise DomainError("this form requires 1 < |z| < 2")
    if 4 * re + 4 <= 0:
        raise OutOfRegion(RegionVerdict(False, (1,)))
    ws = _Workspace(z.bits, max_terms)
    value, terms, rel = _eq8_core(ws, z.value, A.value, tol)
    return _finish(z, A, value, terms, rel, "eq8", 1, tol, diagnostics)


def eval_eq9(
    z,
    A,
    tol: float = DEFAULT_TOL,
    depth: int | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
    diagnostics: bool = False,
) -> EvalReport:
    """``(1+z)**A`` for ``m0 >= 2`` with recursively expanded inner factors.

    ``depth`` bounds the nesting of the recursive expansion (default
    ``m0 + 2``).  ``per_factor_terms`` lists the base series first, then the
    ``r = m0`` group, then ``r = 1 .. m0-1``.
    """
    z = as_scalar(z)
    A = as_exponent(A, z.precision)
    if tol <= 0:
        raise ValueError("tol must be positive")
    m0 = compute_m0(z)
    if m0 <= 1:
        raise DomainError(f"this form requires m0 > 1 (|z| >= 2), got m0 = {m0}")
    verdict = classify_region(z)
    if verdict.singular_shift is not None:
        raise SingularShift(verdict.singular_shift)
    if not verdict.convergent:
        raise OutOfRegion(verdict)
    if depth is None:
        depth = m0 + 2
    ws = _Workspace(z.bits, max_terms)
    value, terms, rel = _eq9_core(ws, z.value, A.value, tol, depth)
    return _finish(z, A, value, terms, rel, "eq9", m0, tol, diagnostics)


def recursive_reciprocal_pow(
    z,
    r: int,
    m: int,
    tol: float = DEFAULT_TOL,
    depth: int | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> Scalar:
    """``(z + 2**r)**(-m)`` through the recursive expansion of ``(1 + z/2**r)**(-m)``."""
    z = as_scalar(z)
    if r < 1 or m < 0:
        raise ValueError("need r >= 1 and m >= 0")
    re, im = z.as_fractions()
    if im == 0 and re == -(2**r):
        raise SingularShift(r)
    if m == 0:
        return Scalar(1, z.precision)
    with working_context(z.bits):
        u = scale2(z.value, -r)
    verdict = classify_region(Scalar._wrap(u, z.precision))
    if not verdict.convergent:
        raise OutOfRegion(verdict)
    if depth is None:
        depth = m0_raw(u) + 2
    ws = _Workspace(z.bits, max_terms)
    value, _, _ = _recip_pow(ws, z.value, r, m, tol, depth)
    return Scalar._wrap(value, z.precision)
