"""Exact univariate polynomials in the cross-channel coordinate y.

Coefficients are :class:`fractions.Fraction` in ascending powers, so sums,
products and definite integrals over [-1, 1] carry no rounding at all.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions, rational strings ("28/45") or floats.

    Floats are converted by their exact binary value; pass strings when a
    short rational is intended.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValueError(f"non-finite coefficient {value!r}")
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


class YPolynomial:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = (0,)):
        cs = [as_fraction(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs:
            cs = [Fraction(0)]
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def constant(cls, c) -> "YPolynomial":
        return cls([c])

    @classmethod
    def monomial(cls, power: int, c=1) -> "YPolynomial":
        return cls([0] * power + [c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.coeffs == (Fraction(0),)

    def _coerce(self, other) -> "YPolynomial":
        if isinstance(other, YPolynomial):
            return other
        return YPolynomial([other])

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return YPolynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return YPolynomial(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, YPolynomial):
            s = as_fraction(other)
            return YPolynomial(c * s for c in self.coeffs)
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return YPolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = YPolynomial([1])
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, YPolynomial):
            return self.coeffs == other.coeffs
        try:
            return self.coeffs == YPolynomial([other]).coeffs
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def integral(self) -> Fraction:
        """Exact definite integral over [-1, 1]."""
        return sum((2 * c / (k + 1) for k, c in enumerate(self.coeffs) if k % 2 == 0),
                   Fraction(0))

    def mean(self) -> Fraction:
        """Exact cross-sectional mean (1/2) * integral over [-1, 1]."""
        return self.integral() / 2

    def __call__(self, y):
        """Evaluate in floating point (Horner); accepts scalars or arrays."""
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for c in reversed(self.coeffs):
            out = out * y + float(c)
        return out

    def exact_at(self, y) -> Fraction:
        y = as_fraction(y)
        out = Fraction(0)
        for c in reversed(self.coeffs):
            out = out * y + c
        return out

    def to_strings(self) -> list[str]:
        return [str(c) for c in self.coeffs]

    def __repr__(self):
        return f"YPolynomial({self.to_strings()})"

    def __str__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if k == 0 else ("y" if k == 1 else f"y^{k}")
            if mono and abs(c) == 1:
                body = mono
            elif mono:
                body = f"{abs(c)}*{mono}"
            else:
                body = str(abs(c))
            terms.append(("-" if c < 0 else "+", body))
        if not terms:
            return "0"
        sign, body = terms[0]
        text = ("-" if sign == "-" else "") + body
        for sign, body in terms[1:]:
            text += f" {sign} {body}"
        return text


def poly_from_strings(coeffs: Sequence) -> YPolynomial:
    return YPolynomial(as_fraction(c) for c in coeffs)
