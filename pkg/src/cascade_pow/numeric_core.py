"""Configurable-precision complex scalars and generalized binomial coefficients.

All arithmetic is carried out with MPFR/MPC through :mod:`gmpy2`.  Precision
is specified in decimal digits and converted to a binary mantissa width once,
at construction time.  Hot loops elsewhere in the package work on the raw
``gmpy2.mpc`` values under :func:`working_context` and wrap the final result
back into a :class:`Scalar`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import PrecisionMismatch, ZeroBase

DEFAULT_PRECISION = 50
FAST_PRECISION = 15
MIN_PRECISION = 15

# extra mantissa bits used internally before rounding back to working precision
GUARD_BITS = 40

_LOG2_10 = math.log2(10)


def precision_bits(digits: int) -> int:
    """Mantissa width in bits that carries ``digits`` significant decimals."""
    return math.ceil(digits * _LOG2_10) + 1


def working_context(bits: int):
    """Context manager selecting a ``bits``-wide MPFR context."""
    return gmpy2.context(precision=bits)


def scale2(x, k: int):
    """``x * 2**k`` exactly, at the operand's own precision.

    ``gmpy2.mul_2exp`` rounds to the ambient context, which would silently
    truncate a wide operand under the default 53-bit context.
    """
    prec = x.precision
    bits = max(prec) if isinstance(prec, tuple) else prec
    with working_context(bits):
        return gmpy2.mul_2exp(x, k)


def _check_precision(digits) -> int:
    if isinstance(digits, bool) or not isinstance(digits, int):
        raise TypeError(f"precision must be an integer number of digits, got {digits!r}")
    if digits < MIN_PRECISION:
        raise ValueError(f"precision must be >= {MIN_PRECISION} digits, got {digits}")
    return digits


def _to_mpfr(x, bits: int):
    with working_context(bits):
        if isinstance(x, Fraction):
            return mpfr(gmpy2.mpq(x.numerator, x.denominator))
        if isinstance(x, str):
            return mpfr(x.strip())
        return mpfr(x)


def _to_mpc(x, bits: int):
    """Round an arbitrary numeric value to an ``mpc`` of width ``bits``."""
    with working_context(bits):
        if isinstance(x, Scalar):
            v = mpc(x.value)
        elif isinstance(x, Fraction):
            v = mpc(mpfr(gmpy2.mpq(x.numerator, x.denominator)))
        elif isinstance(x, str):
            s = x.strip().replace(" ", "")
            v = mpc(s) if ("j" in s or "(" in s) else mpc(mpfr(s))
        elif isinstance(x, tuple) and len(x) == 2:
            v = mpc(_to_mpfr(x[0], bits), _to_mpfr(x[1], bits))
        else:
            v = mpc(x)
    # +0 imaginary part keeps the principal log on the upper side of the cut
    if v.imag == 0:
        v = mpc(v.real, 0, precision=bits)
    return v


class Scalar:
    """Complex number at a fixed working precision (decimal digits).

    Arithmetic between two scalars requires identical precision; Python
    numbers are promoted to the scalar's own precision.
    """

    __slots__ = ("_value", "_precision")

    def __init__(self, value=0, precision: int = DEFAULT_PRECISION):
        self._precision = _check_precision(precision)
        self._value = _to_mpc(value, precision_bits(precision))

    @classmethod
    def from_parts(cls, re, im=0, precision: int = DEFAULT_PRECISION) -> Scalar:
        return cls((re, im), precision)

    @classmethod
    def _wrap(cls, value, precision: int) -> Scalar:
        # caller guarantees ``value`` is an mpc; rounds it to working width
        obj = cls.__new__(cls)
        obj._precision = precision
        obj._value = _to_mpc(value, precision_bits(precision))
        return obj

    @property
    def value(self):
        """The underlying ``gmpy2.mpc``."""
        return self._value

    @property
    def precision(self) -> int:
        return self._precision

    @property
    def bits(self) -> int:
        return precision_bits(self._precision)

    @property
    def re(self):
        return self._value.real

    @property
    def im(self):
        return self._value.imag

    def is_zero(self) -> bool:
        return self._value == 0

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self.re) and gmpy2.is_finite(self.im)

    def as_fractions(self) -> tuple[Fraction, Fraction]:
        """Exact rational values of the stored real and imaginary parts."""
        re = Fraction(*(int(v) for v in self.re.as_integer_ratio()))
        im = Fraction(*(int(v) for v in self.im.as_integer_ratio()))
        return re, im

    def conjugate(self) -> Scalar:
        return Scalar._wrap(self._value.conjugate(), self._precision)

    def _coerce(self, other) -> Scalar:
        if isinstance(other, Scalar):
            if other._precision != self._precision:
                raise PrecisionMismatch(
                    f"cannot combine precision {self._precision} with {other._precision}"
                )
            return other
        if isinstance(other, (Number, Fraction)) or type(other) in (type(mpfr(0)), type(mpc(0))):
            return Scalar(other, self._precision)
        return NotImplemented

    def _binop(self, other, op):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        with working_context(self.bits):
            return Scalar._wrap(op(self._value, other._value), self._precision)

    def __add__(self, other):
        return self._binop(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binop(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binop(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binop(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binop(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binop(other, lambda a, b: b * a)

    def __truediv__(self, other):
        other_s = self._coerce(other)
        if other_s is not NotImplemented and other_s.is_zero():
            raise ZeroDivisionError("division by zero Scalar")
        return self._binop(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        if self.is_zero():
            raise ZeroDivisionError("division by zero Scalar")
        return self._binop(other, lambda a, b: b / a)

    def __neg__(self):
        return Scalar._wrap(-self._value, self._precision)

    def __abs__(self):
        with working_context(self.bits):
            return abs(self._value)

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self._precision == other._precision and self._value == other._value
        if isinstance(other, (Number, Fraction)):
            return self._value == _to_mpc(other, self.bits + 64)
        return NotImplemented

    def __hash__(self):
        return hash((self._precision, self._value))

    def __complex__(self):
        return complex(self._value)

    def __repr__(self):
        return f"Scalar({format_complex(self)}, precision={self._precision})"

    def __reduce__(self):
        return (Scalar._from_pickle, (self.as_fractions(), self._precision))

    @staticmethod
    def _from_pickle(parts, precision):
        return Scalar(parts, precision)


class Exponent:
    """Real exponent ``A``; ``terminating`` is True for nonnegative integers.

    The integer test is exact: the stored binary float must equal its own
    rounding to an integer.
    """

    __slots__ = ("_value", "_precision")

    def __init__(self, value, precision: int = DEFAULT_PRECISION):
        self._precision = _check_precision(precision)
        if isinstance(value, Exponent):
            value = value.value
        if isinstance(value, complex) or type(value) is type(mpc(0)):
            raise TypeError("complex exponents are not supported")
        bits = precision_bits(precision)
        v = _to_mpfr(value, bits)
        if not gmpy2.is_finite(v):
            raise ValueError(f"exponent must be finite, got {value!r}")
        self._value = v

    @property
    def value(self):
        return self._value

    @property
    def precision(self) -> int:
        return self._precision

    @property
    def bits(self) -> int:
        return precision_bits(self._precision)

    @property
    def is_integer(self) -> bool:
        return gmpy2.is_integer(self._value)

    @property
    def terminating(self) -> bool:
        return self.is_integer and self._value >= 0

    def as_fraction(self) -> Fraction:
        return Fraction(*(int(v) for v in self._value.as_integer_ratio()))

    def __float__(self):
        return float(self._value)

    def __int__(self):
        if not self.is_integer:
            raise ValueError("exponent is not an integer")
        return int(self._value)

    def __eq__(self, other):
        if isinstance(other, Exponent):
            return self._precision == other._precision and self._value == other._value
        return NotImplemented

    def __hash__(self):
        return hash((self._precision, self._value))

    def __repr__(self):
        return f"Exponent({format_real(self._value, min(self._precision, 20))})"

    def __reduce__(self):
        return (Exponent, (self.as_fraction(), self._precision))


def as_scalar(x, precision: int = DEFAULT_PRECISION) -> Scalar:
    return x if isinstance(x, Scalar) else Scalar(x, precision)


def as_exponent(a, precision: int = DEFAULT_PRECISION) -> Exponent:
    if isinstance(a, Exponent):
        return a
    return Exponent(a, precision)


def _binomial_raw(a, n: int, terminating: bool):
    """C(a, n) by the multiplicative recurrence in the current context."""
    if terminating and n > int(a):
        return mpfr(0)
    c = mpfr(1)
    for k in range(n):
        c = c * (a - k) / (k + 1)
    return c


def gen_binomial(A: Exponent, n: int) -> Scalar:
    """Generalized binomial coefficient ``A(A-1)...(A-n+1)/n!``.

    Uses the recurrence ``c[k+1] = c[k] * (A-k)/(k+1)`` with guard bits, so
    a nonnegative integer ``A`` gives an exact zero for every ``n > A``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    A = as_exponent(A)
    with working_context(A.bits + GUARD_BITS):
        c = _binomial_raw(A.value, n, A.terminating)
    return Scalar._wrap(c, A.precision)


def gen_binomial_seq(A: Exponent, N: int) -> list[Scalar]:
    """``[C(A,0), ..., C(A,N)]`` sharing one pass of the recurrence."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    A = as_exponent(A)
    out = []
    stop = int(A.value) if A.terminating else None
    with working_context(A.bits + GUARD_BITS):
        c = mpfr(1)
        for k in range(N + 1):
            if stop is not None and k > stop:
                c = mpfr(0)
            out.append(Scalar._wrap(c, A.precision))
            c = c * (A.value - k) / (k + 1)
    return out


def principal_power_raw(base, a, bits: int):
    """``exp(a * Log(base))`` on raw gmpy2 values at ``bits`` width.

    ``base`` must be nonzero.  Integer exponents use repeated squaring.
    """
    with working_context(bits):
        if a == 0:
            return mpc(1)
        if gmpy2.is_integer(a) and abs(a) <= 4096:
            return mpc(base) ** int(a)
        b = mpc(base)
        if b.imag == 0:
            b = mpc(b.real, 0)
        return gmpy2.exp(a * gmpy2.log(b))


def principal_power(base: Scalar, A: Exponent) -> Scalar:
    """Principal-branch power ``base**A`` with ``Im Log(base)`` in (-pi, pi]."""
    base = as_scalar(base)
    A = as_exponent(A, base.precision)
    if base.is_zero():
        if A.value <= 0:
            raise ZeroBase("0 raised to a non-positive power")
        return Scalar(0, base.precision)
    v = principal_power_raw(base.value, A.value, base.bits + GUARD_BITS)
    return Scalar._wrap(v, base.precision)


def format_real(x, digits: int) -> str:
    """Scientific notation with ``digits`` significant decimals."""
    x = mpfr(x) if not isinstance(x, type(mpfr(0))) else x
    if x == 0:
        return "0." + "0" * (digits - 1) + "e+00"
    if not gmpy2.is_finite(x):
        return str(x)
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    frac = mant[1:]
    body = mant[0] + ("." + frac if frac else "")
    return f"{sign}{body}e{exp - 1:+03d}"


def format_complex(z: Scalar, digits: int | None = None) -> str:
    digits = digits or min(z.precision, 20)
    return f"{format_real(z.re, digits)}{'+' if z.im >= 0 else '-'}{format_real(abs(z.im), digits)}j"
