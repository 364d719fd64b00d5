import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_pow.cascade import classify_region
from cascade_pow.errors import ZeroBase
from cascade_pow.numeric_core import Exponent, Scalar
from cascade_pow.oracle import (
    ErrorRecord,
    GridSpec,
    compare,
    direct_pow,
    profile_convergence,
    scan_grid,
)

from conftest import rel_diff


@pytest.mark.parametrize(
    "z, A, expected",
    [(3, 0.5, mpmath.mpf(2)), (-0.5, 2, mpmath.mpf("0.25")), (1j, 1, mpmath.mpc(1, 1))],
)
def test_direct_pow_examples(z, A, expected):
    assert rel_diff(direct_pow(Scalar(z), Exponent(A)), expected) <= 1e-49


def test_direct_pow_zero_base():
    with pytest.raises(ZeroBase):
        direct_pow(Scalar(-1), Exponent(-0.5))


def test_compare_examples():
    ok = compare(Scalar(3), Exponent(0.5), "cascade", 1e-12)
    assert ok.verdict == "ok" and ok.rel_err <= 1e-12
    assert ok.m0 == 2 and ok.terms_total > 0 and ok.wall_ns > 0
    assert compare(Scalar(-3), Exponent(0.5), "cascade", 1e-12).verdict == "out_of_region"
    assert compare(Scalar(1.5), Exponent(0.5), "eq9", 1e-12).verdict == "out_of_region"
    assert compare(Scalar(3), Exponent(0.5), "eq8", 1e-12).verdict == "out_of_region"
    assert compare(Scalar(-2), Exponent(0.5), "cascade", 1e-12).verdict == "singular"


def test_compare_no_convergence_is_data():
    rec = compare(Scalar("-0.9+30j"), Exponent(0.5), "cascade", 1e-30, max_terms=100)
    assert rec.verdict == "no_convergence" and rec.rel_err is None and rec.value is None


def test_compare_rejects_unknown_method():
    with pytest.raises(ValueError):
        compare(Scalar(3), Exponent(0.5), "direct", 1e-12)


def test_rel_err_floor_clamp():
    rec = compare(Scalar(3), Exponent(1), "cascade", 1e-30)
    assert rec.rel_err == 1e-55


def test_absolute_only_flag():
    # 1 + z = 1e-20, so (1+z)^3 = 1e-60 is below 10^-precision
    rec = compare(Scalar("-0.99999999999999999999"), Exponent(3), "cascade", 1e-20)
    assert rec.verdict == "ok" and rec.absolute_only
    assert rec.rel_err <= 1e-55  # the guard-digit floor


def test_huge_z_is_no_convergence_not_out_of_region():
    assert compare(Scalar("1e40"), Exponent(-1.5), "cascade", 1e-20).verdict == "no_convergence"


def test_profile_examples():
    [(cap, err)] = profile_convergence(Scalar(3), Exponent(0.5), [1])
    assert cap == 1 and err == pytest.approx(0.5, rel=1e-40)
    [(_, err)] = profile_convergence(Scalar(3), Exponent(1), [2])
    assert err <= 1e-50
    (_, e10), (_, e20) = profile_convergence(Scalar(3), Exponent(0.5), [10, 20])
    assert e20 < e10


@given(st.lists(st.integers(1, 400), min_size=2, max_size=6, unique=True))
def test_profile_monotone(caps):
    caps = sorted(caps)
    errs = [e for _, e in profile_convergence(Scalar("2+1j"), Exponent(-0.5), caps)]
    floor = 1e-48
    for a, b in zip(errs, errs[1:]):
        assert b <= a or b <= floor


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((0, 1, 0), (0, 0, 1), (Exponent(0.5),))
    with pytest.raises(ValueError):
        GridSpec((1, 0, 2), (0, 0, 1), (Exponent(0.5),))
    with pytest.raises(ValueError):
        GridSpec((0, 1, 2), (0, 0, 1), (Exponent(0.5),), tol=0)


def test_grid_axis_is_closed_and_exact():
    spec = GridSpec((-4, 4, 33), (0, 0, 1), (0.5,))
    xs = [p[0] for p in spec.points()]
    assert xs[0] == -4 and xs[-1] == 4 and xs[4] == -3


def test_scan_examples():
    pos = scan_grid(GridSpec((2, 4, 3), (0, 0, 1), (0.5,), 1e-20))
    assert [r.verdict for r in pos] == ["ok"] * 3
    neg = scan_grid(GridSpec((-4, -2, 3), (0, 0, 1), (0.5,), 1e-20))
    # -4 = -2^2 and -2 = -2^1 are singular shifts
    assert [r.verdict for r in neg] == ["singular", "out_of_region", "singular"]
    single = scan_grid(GridSpec((-2, -2, 1), (0, 0, 1), (0.5,), 1e-20))
    assert single[0].verdict == "singular"
    assert scan_grid(GridSpec((-1, -1, 1), (0, 0, 1), (0.5,), 1e-20))[0].verdict == "singular"


def test_scan_order_and_determinism():
    spec = GridSpec((-2, 3, 6), (-1, 1, 3), (0.5, -1.5), 1e-20)
    a = scan_grid(spec)
    b = scan_grid(spec, workers=2)
    assert a == b
    keys = [(float(r.A), float(r.z.re), float(r.z.im)) for r in a]
    order = [(A, re, im) for A in (0.5, -1.5) for re in (-2, -1, 0, 1, 2, 3) for im in (-1, 0, 1)]
    assert keys == order


def test_scan_region_consistency():
    recs = scan_grid(GridSpec((-3, 3, 13), (-3, 3, 13), (0.5,), 1e-20))
    for rec in recs:
        v = classify_region(rec.z)
        if rec.verdict == "out_of_region":
            assert not v.convergent
        if rec.verdict == "ok":
            assert v.convergent
            assert rec.rel_err <= rec.est_rel_error + 1e-45


def test_record_equality_ignores_wall_time():
    a = compare(Scalar(3), Exponent(0.5), "cascade", 1e-12)
    b = compare(Scalar(3), Exponent(0.5), "cascade", 1e-12)
    assert a == b
    assert isinstance(a, ErrorRecord)
