"""Scalar arithmetic for the exact and the floating-point verification paths.

Two scalar domains are used throughout the package:

* exact rationals with arbitrary-precision integer numerator/denominator,
  used for every identity that must hold as a matrix identity over Q;
* complex double precision, used by the contour-integral solver.

Rationals are gmpy2.mpq when available (much faster), falling back to
fractions.Fraction.  Both keep gcd-reduced canonical form with a positive
denominator and raise ZeroDivisionError on a zero denominator, and both
hash/compare interchangeably with ints.
"""

from __future__ import annotations

import cmath
import math

try:
    from gmpy2 import mpq as Rational
except ImportError:  # pragma: no cover
    from fractions import Fraction as Rational

RATIONAL_BACKEND = Rational.__module__


class PoleError(ZeroDivisionError):
    """A construction hit a vanishing denominator or a function pole."""


def rat(num, den=1):
    """Exact rational num/den."""
    if den == 0:
        raise PoleError("zero denominator in rational %r/%r" % (num, den))
    return Rational(num, den)


def is_exact(x) -> bool:
    """True for scalars living in the exact rational domain."""
    return not isinstance(x, (complex, float))


def inv(v):
    """Reciprocal that keeps exact scalars exact.

    Bare 1/v on a Python int truncates to float; route integer inputs
    through the rational constructor instead.
    """
    if isinstance(v, int):
        return rat(1, v)
    if v == 0:
        raise PoleError("reciprocal of zero")
    return 1 / v


def div(a, b):
    """a/b through inv, so int/int stays rational."""
    return a * inv(b)


def close(a, b, rtol=1e-9, atol=1e-12) -> bool:
    """Tolerance comparison for complex scalars.

    Exact equality is reserved for the rational domain; all complex
    comparisons in the package go through an explicit rtol/atol pair.
    """
    a = complex(a)
    b = complex(b)
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))


class _RationalField:
    name = "rational"
    zero = Rational(0)
    one = Rational(1)

    @staticmethod
    def from_int(i):
        return Rational(i)

    @staticmethod
    def is_zero(v):
        return v == 0

    @staticmethod
    def eq(u, v):
        return u == v


class _ComplexField:
    name = "complex"
    zero = 0j
    one = 1 + 0j

    @staticmethod
    def from_int(i):
        return complex(i)

    @staticmethod
    def is_zero(v):
        return v == 0

    @staticmethod
    def eq(u, v):  # pragma: no cover - guarded below
        raise TypeError("complex scalars compare through close(), not eq()")


RATIONAL = _RationalField()
COMPLEX = _ComplexField()


# Lanczos approximation of log Gamma, g = 607/128, 15 terms.  Valid for
# Re z >= 0.5 with relative error near double-precision roundoff; the
# recurrence log Gamma(z) = log Gamma(z+1) - log z extends it to the rest
# of the plane on the standard branch (analytic off the cut (-inf, 0]).
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_half_plane(z: complex) -> complex:
    zm1 = z - 1.0
    s = _LANCZOS_C[0]
    for i in range(1, 15):
        s += _LANCZOS_C[i] / (zm1 + i)
    t = zm1 + _LANCZOS_G + 0.5
    return (zm1 + 0.5) * cmath.log(t) - t + _LOG_SQRT_2PI + cmath.log(s)


def log_gamma(z) -> complex:
    """Principal-branch log Gamma(z) for complex z.

    Standard branch: real on the positive real axis, analytic on the plane
    cut along (-inf, 0].  Non-positive integers are poles and raise
    PoleError.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == int(z.real):
        raise PoleError("log_gamma pole at z = %r" % z.real)
    acc = 0j
    while z.real < 0.5:
        acc += cmath.log(z)
        z += 1.0
    return _lanczos_half_plane(z) - acc


def gamma(z) -> complex:
    return cmath.exp(log_gamma(z))


def cpow(w, s) -> complex:
    """Principal branch of w**s = exp(s log w) for complex w, s; w = 0 errors."""
    w = complex(w)
    s = complex(s)
    if w == 0:
        raise PoleError("cpow base is zero")
    return cmath.exp(s * cmath.log(w))
