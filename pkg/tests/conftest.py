import os

import mpmath
import pytest
from hypothesis import HealthCheck, settings

# references are built at 80 digits everywhere, well past the 50-digit working precision
mpmath.mp.dps = 80

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def mp_pow(z, A, dps=80):
    """Independent principal power ``(1+z)**A`` via mpmath."""
    with mpmath.workdps(dps):
        return mpmath.power(1 + mpmath.mpc(z), mpmath.mpf(A))


def mp_of(scalar, dps=80):
    with mpmath.workdps(dps):
        return mpmath.mpc(mpmath.mpf(str(scalar.re)), mpmath.mpf(str(scalar.im)))


def rel_diff(scalar, ref, dps=80):
    with mpmath.workdps(dps):
        v = mp_of(scalar, dps)
        return float(abs(v - ref) / abs(ref))


@pytest.fixture
def rel():
    return rel_diff


def base_ratio(z: complex) -> float:
    """``|z| / 2**m0``; near 1 the base factor needs unboundedly many terms."""
    m = 0
    while abs(z) >= 2**m:
        m += 1
    return abs(z) / 2**m


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one summary line per acceptance check, echoed after the run."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
