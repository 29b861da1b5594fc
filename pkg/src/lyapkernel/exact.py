"""Exact fixed-point arithmetic for rational 2x2 matrices.

Fixed points of a rational Moebius map are roots of an integer quadratic, so
they live in Q(sqrt(D)).  A point is stored canonically as ``(P, Q, R, D)``
meaning ``(P + Q*sqrt(D)) / R`` with ``R > 0``, ``gcd(P, Q, R) = 1``, ``D``
square-free, and ``D = 1, Q = 0`` for rationals.  The point at infinity is
``None``.  Canonical tuples compare and hash exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .projective import (
    ELLIPTIC,
    HYPERBOLIC,
    IDENTITY,
    INF,
    INVOLUTION,
    PARABOLIC,
    Matrix2,
    MobiusClass,
)

Point = Optional[tuple[int, int, int, int]]
IntMat = tuple[int, int, int, int]


@lru_cache(maxsize=4096)
def squarefree_split(n: int) -> tuple[int, int]:
    """Return ``(s, D)`` with ``n = s*s*D`` and ``D`` square-free (``n > 0``)."""
    s, D = 1, n
    k = 2
    while k * k <= D:
        while D % (k * k) == 0:
            D //= k * k
            s *= k
        k += 1
    return s, D


def make_point(P: int, Q: int, R: int, D: int) -> Point:
    if R == 0:
        raise ZeroDivisionError("zero denominator")
    if Q == 0 or D == 1:
        P, Q, D = P + Q * (1 if D == 1 else 0), 0, 1
    if R < 0:
        P, Q, R = -P, -Q, -R
    g = math.gcd(math.gcd(P, Q), R)
    if g > 1:
        P, Q, R = P // g, Q // g, R // g
    return (P, Q, R, D)


def point_to_float(x: Point) -> float:
    if x is None:
        return INF
    P, Q, R, D = x
    return (P + Q * math.sqrt(D)) / R


def point_sign(P: int, Q: int, D: int) -> int:
    """Sign of ``P + Q*sqrt(D)``."""
    sp = (P > 0) - (P < 0)
    sq = (Q > 0) - (Q < 0)
    if sq == 0 or D == 1:
        v = P + Q * (1 if D == 1 else 0)
        return (v > 0) - (v < 0)
    if sp == 0 or sp == sq:
        return sq if sp == 0 else sp
    # opposite signs: compare P^2 with Q^2 D
    diff = P * P - Q * Q * D
    return sp if diff > 0 else (-sp if diff < 0 else 0)


def mobius_apply(m: IntMat, x: Point) -> Point:
    a, b, c, d = m
    if x is None:
        return None if c == 0 else make_point(a, 0, c, 1)
    P, Q, R, D = x
    # (a x + b)/(c x + d) with x = (P + Q sqrt D)/R
    n0, n1 = a * P + b * R, a * Q
    d0, d1 = c * P + d * R, c * Q
    if d0 == 0 and d1 == 0:
        return None
    if d1 == 0:
        return make_point(n0, n1, d0, D)
    # rationalise the denominator
    num0 = n0 * d0 - n1 * d1 * D
    num1 = n1 * d0 - n0 * d1
    den = d0 * d0 - d1 * d1 * D
    return make_point(num0, num1, den, D)


def to_integer_matrix(A: Matrix2) -> IntMat:
    """Integer representative of the projective class of an exact matrix."""
    ents = [Fraction(x) for x in A.entries()]
    L = 1
    for e in ents:
        L = L * e.denominator // math.gcd(L, e.denominator)
    ints = [int(e * L) for e in ents]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(ints)  # type: ignore[return-value]


def F_int(A: IntMat) -> IntMat:
    """``2 F(A)``: an integer representative of the chart image."""
    p, q, r, s = A
    return (p - q - r + s, p + q - r - s, p - q + r - s, p + q + r + s)


def matmul(X: IntMat, Y: IntMat) -> IntMat:
    a, b, c, d = X
    e, f, g, h = Y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def pole(m: IntMat) -> Point:
    a, b, c, d = m
    if c == 0:
        return None
    return make_point(-d, 0, c, 1)


@dataclass(frozen=True)
class ExactClass:
    tag: str
    attracting: tuple[Point, ...] = ()
    repelling: tuple[Point, ...] = ()
    neutral: tuple[Point, ...] = ()
    derivatives: tuple[float, ...] = ()

    @property
    def fixed_points(self) -> tuple[Point, ...]:
        return self.attracting + self.repelling + self.neutral

    def to_float_class(self) -> MobiusClass:
        pts = tuple(point_to_float(p) for p in self.fixed_points)
        return MobiusClass(self.tag, pts, self.derivatives)


def classify_int(m: IntMat) -> ExactClass:
    a, b, c, d = m
    if b == 0 and c == 0 and a == d:
        return ExactClass(IDENTITY)
    disc = (d - a) ** 2 + 4 * b * c
    if disc < 0:
        return ExactClass(ELLIPTIC)
    tr = a + d
    if disc == 0:
        pt = make_point(a - d, 0, 2 * c, 1) if c != 0 else None
        return ExactClass(PARABOLIC, neutral=(pt,), derivatives=(1.0,))
    if c == 0:
        # eigenvalue a <-> infinity, eigenvalue d <-> b/(d-a)
        finite = make_point(b, 0, d - a, 1)
        if abs(a) == abs(d):
            return ExactClass(INVOLUTION, neutral=(finite, None), derivatives=(1.0, 1.0))
        ratio = abs(d / a)
        if abs(a) > abs(d):
            return ExactClass(HYPERBOLIC, (None,), (finite,), derivatives=(ratio, 1 / ratio))
        return ExactClass(HYPERBOLIC, (finite,), (None,), derivatives=(1 / ratio, ratio))
    s, D = squarefree_split(disc)
    plus = make_point(a - d, s, 2 * c, D)
    minus = make_point(a - d, -s, 2 * c, D)
    if tr == 0:
        return ExactClass(INVOLUTION, neutral=(plus, minus), derivatives=(1.0, 1.0))
    sq = math.sqrt(disc)
    lam_big = (abs(tr) + sq) / 2
    lam_small = abs(abs(tr) - sq) / 2
    mult = lam_small / lam_big
    attr, rep = (plus, minus) if tr > 0 else (minus, plus)
    return ExactClass(HYPERBOLIC, (attr,), (rep,), derivatives=(mult, 1 / mult))


def classify_exact(A: Matrix2) -> ExactClass:
    return classify_int(to_integer_matrix(A))
