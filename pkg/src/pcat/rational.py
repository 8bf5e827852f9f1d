"""Continued fractions over exact rationals."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator


def cf_terms(x: Fraction) -> Iterator[int]:
    """Partial quotients of ``x``; finite because ``x`` is rational."""
    p, q = x.numerator, x.denominator
    while q:
        a, r = divmod(p, q)
        yield a
        p, q = q, r


def convergents(x: Fraction) -> Iterator[Fraction]:
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    for a in cf_terms(x):
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield Fraction(h1, k1)


def best_rational(x, max_denominator: int) -> Fraction:
    """Closest fraction to ``x`` with denominator at most ``max_denominator``.

    Walks the convergents until the bound is hit, then compares the last
    admissible convergent with the largest admissible semiconvergent.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")
    x = Fraction(x)
    if x.denominator <= max_denominator:
        return x
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    for a in cf_terms(x):
        if a * k1 + k0 > max_denominator:
            j = (max_denominator - k0) // k1
            semi = Fraction(j * h1 + h0, j * k1 + k0)
            last = Fraction(h1, k1)
            return semi if abs(semi - x) < abs(last - x) else last
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
    return Fraction(h1, k1)
