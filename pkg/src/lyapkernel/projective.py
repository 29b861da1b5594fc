"""2x2 matrices, the simplex chart F and real Moebius maps on the extended line.

Points of the extended real line are plain floats; the single point at
infinity is ``math.inf`` (``-inf`` is normalised to ``inf``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

import numpy as np

Number = Union[int, Fraction, float]

INF = math.inf

IDENTITY = "identity"
ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"
INVOLUTION = "involution"
HYPERBOLIC = "hyperbolic"

DEFAULT_TOL = 1e-9
CHORDAL_TOL = 1e-9


def _half(x: Number) -> Number:
    if isinstance(x, Rational):
        return Fraction(x) / 2
    return x / 2


@dataclass(frozen=True)
class Matrix2:
    """Real 2x2 matrix ``[[a, b], [c, d]]``.

    Entries keep their Python type, so integer and ``Fraction`` input stays
    exact through products, ``det`` and :func:`apply_F`.
    """

    a: Number
    b: Number
    c: Number
    d: Number

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Number]]) -> "Matrix2":
        (a, b), (c, d) = rows
        return cls(a, b, c, d)

    @classmethod
    def identity(cls) -> "Matrix2":
        return cls(1, 0, 0, 1)

    def rows(self) -> list[list[Number]]:
        return [[self.a, self.b], [self.c, self.d]]

    def entries(self) -> tuple[Number, Number, Number, Number]:
        return (self.a, self.b, self.c, self.d)

    def to_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def to_float(self) -> "Matrix2":
        return Matrix2(float(self.a), float(self.b), float(self.c), float(self.d))

    @property
    def det(self) -> Number:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> Number:
        return self.a + self.d

    @property
    def scale(self) -> float:
        return float(max(abs(x) for x in self.entries()))

    @property
    def is_exact(self) -> bool:
        return all(isinstance(x, Rational) for x in self.entries())

    def is_integer(self) -> bool:
        return all(isinstance(x, int) for x in self.entries())

    def is_invertible(self, tol: float = 1e-12) -> bool:
        if self.is_exact:
            return self.det != 0
        return abs(float(self.det)) > tol * self.scale ** 2

    def is_nonnegative(self) -> bool:
        return all(x >= 0 for x in self.entries())

    def is_positive(self) -> bool:
        return all(x > 0 for x in self.entries())

    def is_scalar_identity(self, tol: float = 0.0) -> bool:
        s = tol * self.scale
        return abs(self.b) <= s and abs(self.c) <= s and abs(self.a - self.d) <= s and self.a != 0

    def __matmul__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __mul__(self, t: Number) -> "Matrix2":
        return Matrix2(t * self.a, t * self.b, t * self.c, t * self.d)

    __rmul__ = __mul__

    def transpose(self) -> "Matrix2":
        return Matrix2(self.a, self.c, self.b, self.d)

    @property
    def T(self) -> "Matrix2":
        return self.transpose()

    def adjugate(self) -> "Matrix2":
        return Matrix2(self.d, -self.b, -self.c, self.a)

    def inverse(self) -> "Matrix2":
        det = self.det
        if det == 0:
            raise ZeroDivisionError("singular matrix")
        if isinstance(det, Rational):
            det = Fraction(det)
        return Matrix2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def max_abs_diff(self, other: "Matrix2") -> float:
        return max(abs(float(x) - float(y)) for x, y in zip(self.entries(), other.entries()))


H = Matrix2(1, -1, 1, 1)
H_INV = Matrix2(Fraction(1, 2), Fraction(1, 2), Fraction(-1, 2), Fraction(1, 2))


def apply_F(A: Matrix2) -> Matrix2:
    """Chart taking the simplex action of ``A`` to a Moebius map on [-1, 1].

    Equal to ``H A H^-1`` with ``H = [[1, -1], [1, 1]]``.
    """
    p, q, r, s = A.entries()
    return Matrix2(
        _half(p - q - r + s),
        _half(p + q - r - s),
        _half(p - q + r - s),
        _half(p + q + r + s),
    )


def apply_F_inverse(G: Matrix2) -> Matrix2:
    a, b, c, d = G.entries()
    return Matrix2(
        _half((a + b) + (c + d)),
        _half((b - a) + (d - c)),
        _half((c + d) - (a + b)),
        _half((d - c) - (b - a)),
    )


def normalize_point(x: float) -> float:
    if math.isinf(x):
        return INF
    return x


def is_inf(x: float) -> bool:
    return math.isinf(x)


@dataclass(frozen=True)
class MobiusClass:
    tag: str
    fixed_points: tuple[float, ...] = ()
    derivatives: tuple[float, ...] = ()

    @property
    def attracting(self) -> tuple[float, ...]:
        return tuple(p for p, m in zip(self.fixed_points, self.derivatives) if m < 1)

    @property
    def repelling(self) -> tuple[float, ...]:
        return tuple(p for p, m in zip(self.fixed_points, self.derivatives) if m > 1)


@dataclass(frozen=True)
class Mobius:
    """Projective class of an invertible real 2x2 matrix acting on R-hat."""

    rep: Matrix2

    @classmethod
    def of(cls, a: Number, b: Number, c: Number, d: Number) -> "Mobius":
        return cls(Matrix2(a, b, c, d))

    @classmethod
    def from_matrix(cls, A: Matrix2) -> "Mobius":
        """The projective action ``[F(A)]`` of a matrix on [-1, 1]."""
        return cls(apply_F(A))

    def __call__(self, x: float) -> float:
        return mobius_eval(self, x)

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return Mobius(self.rep @ other.rep)

    def inverse(self) -> "Mobius":
        return Mobius(self.rep.adjugate())

    def transpose(self) -> "Mobius":
        return mobius_transpose(self)

    @property
    def pole(self) -> float:
        a, b, c, d = (float(x) for x in self.rep.entries())
        if c == 0:
            return INF
        return -d / c

    def derivative(self, x: float) -> float:
        """Derivative at a finite point; at infinity uses the chart ``1/f(1/z)``."""
        a, b, c, d = (float(x_) for x_ in self.rep.entries())
        det = a * d - b * c
        if is_inf(x):
            if c != 0:
                raise ValueError("derivative at infinity is only defined when infinity is fixed")
            return d / a
        return det / (c * x + d) ** 2

    def classify(self, tol: float = DEFAULT_TOL) -> MobiusClass:
        return mobius_classify(self, tol)


def mobius_eval(f: Mobius, x: float) -> float:
    a, b, c, d = (float(v) for v in f.rep.entries())
    if is_inf(x):
        return INF if c == 0 else a / c
    den = c * x + d
    if den == 0:
        return INF
    return normalize_point((a * x + b) / den)


def mobius_transpose(f: Mobius) -> Mobius:
    return Mobius(f.rep.transpose())


def s_map(x: float) -> float:
    """The involution ``x -> -1/x`` on R-hat."""
    if is_inf(x):
        return 0.0
    if x == 0:
        return INF
    return -1.0 / x


def _point_from_vector(x: float, y: float) -> float:
    if y == 0:
        return INF
    return normalize_point(x / y)


def _eigen_point(m: tuple[float, float, float, float], lam: float) -> float:
    a, b, c, d = m
    u = (b, lam - a)
    v = (lam - d, c)
    if math.hypot(*u) >= math.hypot(*v):
        return _point_from_vector(*u)
    return _point_from_vector(*v)


def mobius_classify(f: Mobius, tol: float = DEFAULT_TOL) -> MobiusClass:
    """Classify via the fixed-point discriminant ``(d-a)^2 + 4bc``.

    Fixed points are eigen-directions of the representative; the derivative
    at the fixed point belonging to eigenvalue ``lam`` is ``lam_other/lam``,
    which also covers the point at infinity without a limit.
    """
    rep = f.rep
    if rep.is_exact:
        from .exact import classify_exact

        return classify_exact(rep).to_float_class()
    s = rep.scale
    a, b, c, d = (float(x) / s for x in rep.entries())
    m = (a, b, c, d)
    if abs(b) <= tol and abs(c) <= tol and abs(a - d) <= tol:
        return MobiusClass(IDENTITY)
    tr = a + d
    disc = (d - a) ** 2 + 4 * b * c
    if disc < -tol:
        return MobiusClass(ELLIPTIC)
    if disc <= tol:
        p = _eigen_point(m, tr / 2)
        return MobiusClass(PARABOLIC, (p,), (1.0,))
    sq = math.sqrt(disc)
    # the larger-modulus eigenvalue computed without cancellation
    big = (tr + math.copysign(sq, tr)) / 2 if tr != 0 else sq / 2
    det = a * d - b * c
    small = det / big
    p_big = _eigen_point(m, big)
    p_small = _eigen_point(m, small)
    m_big = abs(small / big)
    m_small = abs(big / small)
    if abs(m_big - 1) <= tol and abs(m_small - 1) <= tol:
        return MobiusClass(INVOLUTION, (p_big, p_small), (1.0, 1.0))
    return MobiusClass(HYPERBOLIC, (p_big, p_small), (m_big, m_small))


def hyperbolic_distance(x: float, y: float) -> float:
    if not (abs(x) < 1 and abs(y) < 1):
        raise ValueError(f"hyperbolic distance needs points in (-1, 1), got {x}, {y}")
    return 2.0 * math.atanh(abs((x - y) / (1.0 - x * y)))


def chordal_angle(x: float) -> float:
    if is_inf(x):
        return 0.0
    return 2.0 * math.atan2(1.0, x)


def chordal_distance(x: float, y: float) -> float:
    t = abs(chordal_angle(x) - chordal_angle(y)) % (2 * math.pi)
    return min(t, 2 * math.pi - t)


def same_point(x: float, y: float, tol: float = CHORDAL_TOL) -> bool:
    return chordal_distance(x, y) < tol


def as_matrix(obj: Union[Matrix2, Sequence[Sequence[Number]], Iterable[Number]]) -> Matrix2:
    if isinstance(obj, Matrix2):
        return obj
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    obj = list(obj)
    if len(obj) == 4:
        return Matrix2(*obj)
    return Matrix2.from_rows(obj)
