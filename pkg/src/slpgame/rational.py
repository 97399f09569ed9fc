"""Parsing and formatting helpers for exact rationals.

Every scalar in the package is a :class:`fractions.Fraction`.  JSON documents
carry them as ``"p/q"`` strings.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Union

Rational = Fraction
RationalLike = Union[Fraction, int, str]


def q(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and strings ("3/4", "0.1", "2") to a Fraction.

    Floats are rejected: they would silently smuggle rounding into the
    exact pipeline.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def fmt(value: Fraction) -> str:
    """Serialize as ``"p/q"``; the denominator is always written."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_point(text: str) -> tuple[Fraction, ...]:
    """Parse ``"3/10,7/10"`` into a tuple of Fractions."""
    return tuple(q(part) for part in text.split(",") if part.strip())
