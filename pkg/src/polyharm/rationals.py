"""Scalar backend for the two computation modes.

Exact mode works on arbitrary-precision rationals; gmpy2's mpq is used when
importable (it is an order of magnitude faster on the deep truncation degrees
the polyharmonic sweeps need) with ``fractions.Fraction`` as a drop-in
fallback.  Float mode uses plain doubles and exists for speed and for
finite-difference cross-validation only.  A computation never mixes modes.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

try:
    from gmpy2 import mpq as _rat

    BACKEND = "gmpy2"
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _rat = Fraction
    BACKEND = "fractions"

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

Rational = Union[Fraction, type(_rat(0))]
Scalar = Union[Rational, float]


def rational(value=0, den=None):
    """Build an exact rational from ints, strings like ``"p/q"``, or Fractions."""
    if den is not None:
        return _rat(value, den)
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact rationals")
    return _rat(value)


def parse_rational(text: str):
    """Parse ``"p"`` or ``"p/q"`` exactly."""
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        d = int(den)
        if d == 0:
            raise ZeroDivisionError(f"zero denominator in {text!r}")
        return _rat(int(num), d)
    return _rat(int(text))


def format_rational(value) -> str:
    """Canonical ``"p/q"`` form (lowest terms, positive denominator)."""
    v = value if isinstance(value, (Fraction,)) or BACKEND == "fractions" else value
    return f"{v.numerator}/{v.denominator}"


def coerce(value, mode: str):
    """Convert a number into the scalar type of the given mode."""
    if mode == EXACT:
        if isinstance(value, float):
            raise TypeError("exact mode rejects floats; pass ints or rationals")
        return _rat(value) if not isinstance(value, str) else parse_rational(value)
    if mode == FLOAT:
        return float(value)
    raise ValueError(f"unknown mode {mode!r}")


def scalar_zero(mode: str):
    return _rat(0) if mode == EXACT else 0.0


def scalar_one(mode: str):
    return _rat(1) if mode == EXACT else 1.0


def inv(value):
    """Multiplicative inverse preserving scalar type."""
    if isinstance(value, float):
        return 1.0 / value
    return 1 / _rat(value)


def as_float(value) -> float:
    return float(value)
