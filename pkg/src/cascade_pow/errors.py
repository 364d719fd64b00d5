"""Exception hierarchy shared by every evaluation path."""

from __future__ import annotations


class CascadeError(Exception):
    """Base class for all errors raised by :mod:`cascade_pow`."""


class PrecisionMismatch(CascadeError, ValueError):
    """Two scalars with different working precision were combined."""


class ZeroBase(CascadeError, ValueError):
    """A zero base was raised to a non-positive exponent."""


class DomainError(CascadeError, ValueError):
    """An argument lies outside the domain where a series is defined."""


class ZeroDenominator(CascadeError, ZeroDivisionError):
    """``y == 0`` in the two-variable form ``(x + y)**A``."""


class SingularShift(CascadeError, ZeroDivisionError):
    """``z == -2**r`` makes a shifted factor undefined."""

    def __init__(self, r: int):
        super().__init__(f"z = -2^{r} makes the shifted factor singular")
        self.r = r


class OutOfRegion(CascadeError, ValueError):
    """At least one cascade factor argument has modulus >= 1."""

    def __init__(self, verdict):
        shifts = ", ".join(str(r) for r in verdict.failing_shifts)
        super().__init__(f"factor arguments not inside the unit disk for r in [{shifts}]")
        self.verdict = verdict


class NoConvergence(CascadeError, ArithmeticError):
    """The tail certificate was not met within the allowed number of terms."""

    def __init__(self, terms: int, bound: float | None = None):
        msg = f"tail certificate not met after {terms} terms"
        if bound is not None:
            msg += f" (last bound {bound:.3e})"
        super().__init__(msg)
        self.terms = terms
        self.bound = bound


class BranchMismatch(CascadeError):
    """The product differs from the principal power by a pure phase."""

    def __init__(self, ratio):
        super().__init__(f"value/oracle = {ratio!r} is a pure phase; branch mismatch")
        self.ratio = ratio


class RecursionLimit(CascadeError, RecursionError):
    """The nested reciprocal-power expansion exhausted its depth budget."""
