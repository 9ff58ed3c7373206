"""Exact rational arithmetic and the complex log-gamma kernel helpers."""

import cmath
import math

import pytest
from hypothesis import given, strategies as st

import mpmath

from bqkz.scalar_field import (
    COMPLEX,
    PoleError,
    RATIONAL,
    RATIONAL_BACKEND,
    close,
    cpow,
    div,
    gamma,
    inv,
    is_exact,
    log_gamma,
    rat,
)

rationals = st.builds(
    rat, st.integers(min_value=-200, max_value=200), st.integers(min_value=1, max_value=60)
)


def test_backend_is_reported():
    assert RATIONAL_BACKEND in ("gmpy2", "fractions")


def test_rat_reduces():
    assert rat(2, 4) == rat(1, 2)
    assert rat(-6, 3) == -2
    assert rat(5) == 5


def test_is_exact():
    assert is_exact(rat(1, 3))
    assert is_exact(7)
    assert not is_exact(0.5)
    assert not is_exact(1 + 2j)


@given(rationals, rationals, rationals)
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + (-a) == 0


@given(rationals)
def test_inverse_roundtrip(a):
    if a == 0:
        with pytest.raises(PoleError):
            inv(a)
    else:
        assert a * inv(a) == 1
        assert div(1, a) == inv(a)


def test_inv_of_int_stays_exact():
    v = inv(3)
    assert is_exact(v)
    assert 3 * v == 1


def test_div_pole():
    with pytest.raises(PoleError):
        div(rat(1, 2), rat(0))


def test_pole_error_is_zero_division():
    assert issubclass(PoleError, ZeroDivisionError)


def test_close_basics():
    assert close(1.0, 1.0 + 1e-13)
    assert not close(1.0, 1.1)
    assert close(0.0, 1e-13)


def test_field_singletons():
    assert RATIONAL.is_zero(rat(0))
    assert RATIONAL.eq(rat(1, 2), rat(2, 4))
    assert COMPLEX.is_zero(0j)
    with pytest.raises(TypeError):
        COMPLEX.eq(1j, 1j)


_GRID = [
    0.5 + 0j,
    1.0 + 0j,
    3.7 - 0.4j,
    0.3 + 2.1j,
    -1.4 + 0.9j,
    -2.6 - 1.7j,
    -0.1 + 0.05j,
    5.5 + 8.0j,
    -6.3 + 0.2j,
    0.9 - 3.3j,
]


def test_log_gamma_against_high_precision_oracle():
    mpmath.mp.dps = 50
    for z in _GRID:
        want = complex(mpmath.loggamma(mpmath.mpc(z.real, z.imag)))
        got = log_gamma(z)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want)), z


def test_log_gamma_recurrence():
    """log Gamma(z+1) = log Gamma(z) + log z off the cut, to 1e-12."""
    for z in _GRID:
        lhs = log_gamma(z + 1)
        rhs = log_gamma(z) + cmath.log(z)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs)), z


def test_log_gamma_reflection():
    """log Gamma(z) + log Gamma(1-z) matches log(pi / sin(pi z)) up to the
    branch lattice 2 pi i Z, to 1e-11.  Integer points sit on poles of one
    side or the other and are excluded."""
    for z in _GRID:
        if z.imag == 0.0 and z.real == int(z.real):
            continue
        total = log_gamma(z) + log_gamma(1 - z)
        ref = cmath.log(math.pi / cmath.sin(math.pi * z))
        diff = (total - ref) / (2j * math.pi)
        nearest = round(diff.real)
        assert abs(diff - nearest) <= 1e-11 * max(1.0, abs(total)), z


def test_gamma_positive_integers():
    for m, want in ((1, 1.0), (2, 1.0), (3, 2.0), (5, 24.0)):
        assert close(gamma(m), want, rtol=1e-12)


def test_cpow_principal_branch():
    assert close(cpow(4.0, 0.5), 2.0, rtol=1e-12)
    z = 1.3 - 0.8j
    assert close(cpow(z, 1.0), z, rtol=1e-12)
    a, b = 0.37 + 0.21j, -0.6 + 0.9j
    assert close(cpow(z, a + b), cpow(z, a) * cpow(z, b), rtol=1e-11)
