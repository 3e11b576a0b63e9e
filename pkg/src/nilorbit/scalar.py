"""Scalars: exact rationals, or tagged finite-precision reals.

Exact values are ``int`` or ``fractions.Fraction`` (always reduced).  Anything
else that behaves like a real number is *approximate*; those are carried as
``mpmath.mpf`` at the working precision, which defaults to 128 significand
bits and can be changed with the ``NILORBIT_PRECISION`` environment variable.
Python's own arithmetic already does the right thing when the two kinds mix:
``Fraction + mpf`` is an ``mpf``, so the approximate tag propagates.
"""

from __future__ import annotations

import math
import os
import re
from fractions import Fraction
from numbers import Rational
from typing import Any, Union

import mpmath

Scalar = Union[int, Fraction, "mpmath.mpf", float]

DEFAULT_TOL = 1e-12

_PREC_ENV = "NILORBIT_PRECISION"


def working_precision() -> int:
    raw = os.environ.get(_PREC_ENV, "128")
    try:
        bits = int(raw)
    except ValueError as exc:
        raise ValueError(f"{_PREC_ENV} must be an integer, got {raw!r}") from exc
    if bits < 64:
        raise ValueError(f"{_PREC_ENV} must be at least 64 bits, got {bits}")
    return bits


try:
    mpmath.mp.prec = working_precision()
except ValueError:
    # reported by whoever validates the environment (the CLI exits with 2)
    mpmath.mp.prec = 128


def _fraction_to_mpf(self, prec, rounding):
    return mpmath.mpf(self.numerator) / self.denominator


# mpmath converts any object with an ``_mpmath_`` hook; without it
# ``Fraction - mpf``, ``Fraction / mpf`` and every mixed comparison raise.
if not hasattr(Fraction, "_mpmath_"):
    Fraction._mpmath_ = _fraction_to_mpf


def is_exact(x: Any) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def all_exact(xs) -> bool:
    return all(is_exact(x) for x in xs)


def approx(x) -> mpmath.mpf:
    """Tag ``x`` as approximate."""
    return mpmath.mpf(x) if not isinstance(x, Fraction) else mpmath.mpf(x.numerator) / x.denominator


def exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def normalize(x: Scalar) -> Scalar:
    """Canonical in-memory form: Fraction for exact values, mpf otherwise."""
    if isinstance(x, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, mpmath.mpf):
        return x
    if isinstance(x, float):
        return mpmath.mpf(x)
    return mpmath.mpf(x)


_SQRT = re.compile(r"^sqrt\(\s*([0-9/.]+)\s*\)$")


def parse_scalar(text: Any) -> Scalar:
    """Parse a scalar from JSON-ish input.

    ``3``, ``"3/7"`` and ``"0.125"`` are exact.  JSON floats and strings
    prefixed with ``~`` (``"~1.4142"``, ``"~sqrt(2)"``) are approximate.
    """
    if isinstance(text, bool):
        raise ValueError("booleans are not scalars")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return mpmath.mpf(text)
    if isinstance(text, Fraction):
        return text
    if not isinstance(text, str):
        raise ValueError(f"cannot parse scalar from {text!r}")
    s = text.strip()
    if s.startswith("~"):
        body = s[1:].strip()
        m = _SQRT.match(body)
        if m:
            return mpmath.sqrt(mpmath.mpf(Fraction(m.group(1)).numerator) / Fraction(m.group(1)).denominator)
        try:
            return mpmath.mpf(body)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"malformed approximate scalar {text!r}") from exc
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed rational {text!r}") from exc


def format_scalar(x: Scalar, digits: int = 30) -> str:
    """Stable text form used in reports."""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return "~" + mpmath.nstr(mpmath.mpf(x), digits, strip_zeros=False)


def is_zero(x: Scalar, tol: float = DEFAULT_TOL) -> bool:
    if is_exact(x):
        return x == 0
    return abs(x) <= tol


def is_integer(x: Scalar, tol: float = DEFAULT_TOL) -> bool:
    if isinstance(x, int):
        return True
    if isinstance(x, Fraction):
        return x.denominator == 1
    return abs(x - nearest_int(x)) <= tol


def floor(x: Scalar) -> int:
    if isinstance(x, (int, Fraction)):
        return math.floor(x)
    return int(mpmath.floor(x))


def nearest_int(x: Scalar) -> int:
    """Round half up; deterministic on exact ties."""
    return floor(x + Fraction(1, 2)) if is_exact(x) else int(mpmath.floor(x + mpmath.mpf(0.5)))


def frac(x: Scalar) -> Scalar:
    """``{x} = x - floor(x)`` in [0, 1)."""
    return x - floor(x)


def norm_rz(x: Scalar) -> Scalar:
    """Distance to the nearest integer."""
    f = frac(x)
    return min(f, 1 - f)


def to_float(x: Scalar) -> float:
    return float(x)


def height(x: Fraction) -> int:
    """max(|a|, |b|) for x = a/b in lowest terms."""
    x = Fraction(x)
    return max(abs(x.numerator), x.denominator)


def lcm_denominators(xs) -> int:
    out = 1
    for x in xs:
        out = math.lcm(out, Fraction(x).denominator)
    return out


def best_rational(x: Scalar, max_den: int) -> Fraction:
    """Closest rational with denominator at most ``max_den``."""
    if isinstance(x, Fraction):
        return x.limit_denominator(max_den)
    if isinstance(x, int):
        return Fraction(x)
    return binary_fraction(x).limit_denominator(max_den)


def binary_fraction(x: Scalar) -> Fraction:
    """The exact rational value of a scalar (an mpf is a dyadic rational)."""
    if is_exact(x):
        return Fraction(x)
    m, e = mpmath.mpf(x).man_exp
    return Fraction(int(m)) * (Fraction(2) ** int(e))


# Order helpers that accept any mix of exact and approximate scalars.


def slt(a: Scalar, b: Scalar) -> bool:
    return (a - b) < 0


def smax(values, default: Scalar = Fraction(0)) -> Scalar:
    best = None
    for v in values:
        if best is None or slt(best, v):
            best = v
    return default if best is None else best


def smin(values, default: Scalar = Fraction(0)) -> Scalar:
    best = None
    for v in values:
        if best is None or slt(v, best):
            best = v
    return default if best is None else best


class Ordered:
    """Sort key wrapper for mixed exact/approximate scalars."""

    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return slt(self.v, other.v)

    def __eq__(self, other):
        return (self.v - other.v) == 0
