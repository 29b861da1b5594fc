"""Depth-2 heteroclinic detection, invariant arcs and conjugation to positivity.

For an invertible non-negative family exactly one of two things happens:
some composition of length at most two carries an attracting (or neutral)
fixed point onto a repelling (or neutral) one, or there is a common strictly
invariant arc, and conjugating by the affine chart of that arc makes every
matrix entrywise positive.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import exact as ex
from .errors import ArcConstructionFailed, PositivityFailed, PreconditionError
from .kernel import CertifiedValue, WeightedFamily, compute_lyapunov
from .projective import (
    CHORDAL_TOL,
    DEFAULT_TOL,
    H,
    H_INV,
    HYPERBOLIC,
    Matrix2,
    Mobius,
    MobiusClass,
    apply_F,
    is_inf,
    same_point,
)

log = logging.getLogger(__name__)

MAX_HALVINGS = 200
POSITIVITY_TOL = 1e-14

Word = tuple[int, ...]


@dataclass(frozen=True)
class Depth2System:
    """Every composition of length one or two, with fixed-point data.

    ``words[k] = (i1, i2)`` stands for ``f_{i2} o f_{i1}``.  Indices refer to
    the original family; scalar multiples of the identity are left out.
    """

    words: tuple[Word, ...]
    maps: tuple[Mobius, ...]
    classifications: tuple[MobiusClass, ...]
    attr2: tuple[float, ...]
    rep2: tuple[float, ...]
    pole2: tuple[float, ...]
    excluded: tuple[int, ...]
    exact_reps: Optional[tuple[ex.IntMat, ...]] = None
    exact_classes: Optional[tuple[ex.ExactClass, ...]] = None


@dataclass(frozen=True)
class GhcWitness:
    kind: str  # "non-hyperbolic" or "heteroclinic"
    word: Word
    tag: str = HYPERBOLIC
    a: Optional[float] = None
    b: Optional[float] = None

    def describe(self) -> str:
        w = "".join(f"f{i}" for i in reversed(self.word)) or "id"
        if self.kind == "non-hyperbolic":
            return f"{w} is {self.tag}"
        return f"{w} maps attracting point {self.a!r} to repelling point {self.b!r}"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "word": list(self.word),
            "tag": self.tag,
            "a": _json_point(self.a),
            "b": _json_point(self.b),
            "description": self.describe(),
        }


def _json_point(x):
    if x is None:
        return None
    return "inf" if is_inf(x) else x


@dataclass(frozen=True)
class GhcResult:
    detected: bool
    witness: Optional[GhcWitness] = None

    def __bool__(self) -> bool:
        return self.detected


@dataclass(frozen=True)
class InvariantArc:
    A: float
    B: float
    certified: bool


@dataclass(frozen=True)
class Conjugation:
    P: Matrix2
    positive_images: tuple[Matrix2, ...]


def scalar_identity_indices(family: WeightedFamily, tol: float = DEFAULT_TOL) -> tuple[int, ...]:
    out = []
    for i, m in enumerate(family.matrices):
        if m.is_scalar_identity(0.0 if m.is_exact else tol):
            out.append(i)
    return tuple(out)


def _words(indices: Sequence[int]) -> list[Word]:
    return [(i,) for i in indices] + [(i, j) for i in indices for j in indices]


def build_depth2(family: WeightedFamily, tol: float = DEFAULT_TOL) -> Depth2System:
    if not family.is_nonnegative():
        raise PreconditionError("depth-2 analysis needs non-negative matrices")
    excluded = scalar_identity_indices(family, tol)
    keep = [i for i in range(len(family)) if i not in excluded]
    words = _words(keep)
    F = [apply_F(m) for m in family.matrices]
    maps = []
    for w in words:
        rep = F[w[0]]
        for j in w[1:]:
            rep = F[j] @ rep
        maps.append(Mobius(rep))
    exact_reps = exact_classes = None
    if all(m.is_exact for m in family.matrices):
        Fi = [ex.F_int(ex.to_integer_matrix(m)) for m in family.matrices]
        reps = []
        for w in words:
            rep = Fi[w[0]]
            for j in w[1:]:
                rep = ex.matmul(Fi[j], rep)
            reps.append(rep)
        exact_reps = tuple(reps)
        exact_classes = tuple(ex.classify_int(r) for r in reps)
        classes = tuple(c.to_float_class() for c in exact_classes)
    else:
        classes = tuple(m.classify(tol) for m in maps)
    attr, rep2, poles = [], [], []
    for m, c in zip(maps, classes):
        for p, d in zip(c.fixed_points, c.derivatives):
            if d <= 1 + tol:
                attr.append(p)
            if d >= 1 - tol:
                rep2.append(p)
        pole = m.pole
        if not is_inf(pole):
            poles.append(pole)
    return Depth2System(
        tuple(words), tuple(maps), classes, tuple(attr), tuple(rep2), tuple(poles),
        excluded, exact_reps, exact_classes,
    )


def _detect_exact(sys: Depth2System, single_neutral_only: bool = False) -> GhcResult:
    assert sys.exact_reps is not None and sys.exact_classes is not None
    words, reps, classes = [], [], []
    for w, r, c in zip(sys.words, sys.exact_reps, sys.exact_classes):
        if c.tag != HYPERBOLIC:
            if single_neutral_only and len(w) == 2:
                continue
            return GhcResult(True, GhcWitness("non-hyperbolic", w, c.tag))
        words.append(w)
        reps.append(r)
        classes.append(c)
    attr = list(dict.fromkeys(p for c in classes for p in c.attracting))
    rep = set(p for c in classes for p in c.repelling)
    identity = (1, 0, 0, 1)
    for w, h in [((), identity)] + list(zip(words, reps)):
        for a in attr:
            b = ex.mobius_apply(h, a)
            if b in rep:
                return GhcResult(
                    True,
                    GhcWitness("heteroclinic", w, a=ex.point_to_float(a), b=ex.point_to_float(b)),
                )
    return GhcResult(False)


def detect_ghc_depth2(
    sys: Depth2System, tol: float = CHORDAL_TOL, *, single_neutral_only: bool = False
) -> GhcResult:
    """Depth-2 generalized heteroclinic connection test.

    Integer/rational families use exact arithmetic in ``Q(sqrt D)``; real
    families compare points with the chordal tolerance.

    ``single_neutral_only`` (exact path only) skips non-hyperbolic products of
    length two instead of reporting them.  That is not a correct test; it
    exists to reproduce the legacy census counts for b = 9, 10.
    """
    if sys.exact_reps is not None:
        return _detect_exact(sys, single_neutral_only)
    for w, c in zip(sys.words, sys.classifications):
        if c.tag != HYPERBOLIC:
            return GhcResult(True, GhcWitness("non-hyperbolic", w, c.tag))
    for w, h in [((), None)] + list(zip(sys.words, sys.maps)):
        for a in sys.attr2:
            ha = a if h is None else h(a)
            for b in sys.rep2:
                if same_point(ha, b, tol):
                    return GhcResult(True, GhcWitness("heteroclinic", w, a=a, b=b))
    return GhcResult(False)


def _maps(family: WeightedFamily, skip: Sequence[int] = ()) -> list[Mobius]:
    return [Mobius.from_matrix(m) for i, m in enumerate(family.matrices) if i not in skip]


def arc_certifies(family: WeightedFamily, A, B, skip: Sequence[int] = ()) -> bool:
    """Strict invariance of [A, B]: no pole inside and both endpoint images in (A, B).

    With ``Fraction`` endpoints and an exact family the check is exact.
    """
    if not A < B:
        return False
    for i, m in enumerate(family.matrices):
        if i in skip:
            continue
        G = apply_F(m)
        p1, p2, q1, q2 = G.entries()
        den_a = q1 * A + q2
        den_b = q1 * B + q2
        # pole in [A, B] iff the denominator vanishes or changes sign there
        if den_a == 0 or den_b == 0 or (den_a > 0) != (den_b > 0):
            return False
        for den, x in ((den_a, A), (den_b, B)):
            y = (p1 * x + p2) / den
            if not A < y < B:
                return False
    return True


def find_invariant_arc(
    family: WeightedFamily, tol: float = DEFAULT_TOL, sys: Optional[Depth2System] = None
) -> InvariantArc:
    """Constructive version of the invariant-arc argument for g.h.c.-free families."""
    if sys is None:
        sys = build_depth2(family, tol)
    ghc = detect_ghc_depth2(sys)
    if ghc:
        raise PreconditionError(f"family has a heteroclinic connection: {ghc.witness.describe()}")
    skip = sys.excluded
    fs = _maps(family, skip)
    finite = lambda xs: [x for x in xs if not is_inf(x)]  # noqa: E731
    attr = finite(sys.attr2)
    rep = [_snap(x, tol) for x in finite(sys.rep2)]
    poles = finite(sys.pole2)
    if not attr:
        raise ArcConstructionFailed("no attracting fixed points")
    a1, a2 = min(attr), max(attr)
    if a1 < -1 - tol or a2 > 1 + tol:
        raise ArcConstructionFailed(f"attracting points outside [-1, 1]: {a1!r}, {a2!r}")
    beta1 = max([-2.0] + [p for p in poles if p < -1] + [x for x in rep if x <= -1])
    beta2 = min([2.0] + [p for p in poles if p > 1] + [x for x in rep if x >= 1])

    A_prime = min([a1] + [f(a2) for f in fs])
    A = (beta1 + A_prime) / 2
    for _ in range(MAX_HALVINGS):
        if all(f(A) < beta2 for f in fs):
            break
        A = (A + A_prime) / 2
    else:
        raise ArcConstructionFailed("left endpoint search did not terminate")
    B_prime = max([a2] + [f(A) for f in fs])
    B = (B_prime + beta2) / 2
    for _ in range(MAX_HALVINGS):
        if all(A < f(B) for f in fs):
            break
        B = (B + B_prime) / 2
    else:
        raise ArcConstructionFailed("right endpoint search did not terminate")
    if not arc_certifies(family, A, B, skip):
        raise ArcConstructionFailed(f"arc [{A!r}, {B!r}] failed endpoint verification")
    log.debug("invariant arc [%r, %r] (beta1=%r, beta2=%r)", A, B, beta1, beta2)
    return InvariantArc(A, B, True)


def arc_contraction_radius(family: WeightedFamily, A, B, skip: Sequence[int] = ()) -> float:
    """Radius ``r`` of the conjugated family for the arc [A, B]; 2.0 if the arc does not certify."""
    if not arc_certifies(family, A, B, skip):
        return 2.0
    r = 0.0
    for i, m in enumerate(family.matrices):
        if i in skip:
            continue
        p1, p2, q1, q2 = (float(x) for x in apply_F(m).entries())
        for x in (A, B):
            y = (p1 * x + p2) / (q1 * x + q2)
            r = max(r, abs((2 * y - (A + B)) / (B - A)))
    return r


def refine_arc(family: WeightedFamily, arc: InvariantArc, skip: Sequence[int] = ()) -> InvariantArc:
    """Move the endpoints of a certified arc to shrink the contraction radius.

    Nelder-Mead on the radius, where every candidate must pass the strict
    invariance check.  The result is never worse than the input.
    """
    start = arc_contraction_radius(family, arc.A, arc.B, skip)
    if start >= 1:
        return arc
    res = minimize(
        lambda z: arc_contraction_radius(family, z[0], z[1], skip),
        np.array([float(arc.A), float(arc.B)]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
    )
    A, B = (float(v) for v in res.x)
    if res.fun < start and arc_certifies(family, A, B, skip):
        log.debug("refined arc [%r, %r]: radius %.6g -> %.6g", A, B, start, res.fun)
        return InvariantArc(A, B, True)
    return arc


def _snap(x: float, tol: float) -> float:
    for t in (-1.0, 1.0):
        if abs(x - t) <= tol:
            return t
    return x


def arc_conjugator(A, B) -> Matrix2:
    """``P = H^-1 Q H`` for the affine chart ``Q`` of [A, B] onto [-1, 1]."""
    Q = Matrix2(2, -(A + B), 0, B - A)
    return H_INV @ Q @ H


def conjugate_to_positive(
    family: WeightedFamily, arc: InvariantArc, tol: float = POSITIVITY_TOL, skip: Sequence[int] = ()
) -> Conjugation:
    if not arc.certified:
        raise PreconditionError("arc is not certified")
    if is_inf(arc.A) or is_inf(arc.B):
        raise PreconditionError("arc endpoints must be finite")
    return conjugate_with(family, arc_conjugator(arc.A, arc.B), tol, skip)


def conjugate_with(
    family: WeightedFamily, P: Matrix2, tol: float = POSITIVITY_TOL, skip: Sequence[int] = ()
) -> Conjugation:
    Pinv = P.inverse()
    images = []
    for i, m in enumerate(family.matrices):
        if i in skip:
            continue
        Mi = P @ m @ Pinv
        floor = tol * Mi.scale if not Mi.is_exact else 0
        if not all(x > floor for x in Mi.entries()):
            raise PositivityFailed(f"conjugated matrix {i} is not positive: {Mi.rows()}")
        images.append(Mi)
    return Conjugation(P, tuple(images))


@dataclass(frozen=True)
class PipelineResult:
    status: str  # Positive | Conjugated | GhcDetected
    value: Optional[CertifiedValue] = None
    P: Optional[Matrix2] = None
    arc: Optional[InvariantArc] = None
    witness: Optional[GhcWitness] = None
    identity_part: float = 0.0
    identity_weight: float = 0.0

    @property
    def certified(self) -> bool:
        return self.value is not None


def _restrict(family: WeightedFamily, skip: Sequence[int]) -> WeightedFamily:
    keep = [i for i in range(len(family)) if i not in skip]
    total = math.fsum(family.weights[i] for i in keep)
    return WeightedFamily(
        tuple(family.matrices[i] for i in keep), tuple(family.weights[i] / total for i in keep)
    )


def lyapunov_nonnegative(
    family: WeightedFamily,
    eps: float = 1e-10,
    tol: float = DEFAULT_TOL,
    *,
    r: Optional[float] = None,
    N: Optional[int] = None,
    M: Optional[int] = None,
    refine: bool = True,
) -> PipelineResult:
    """Full pipeline for an invertible non-negative family.

    Members that are scalar multiples ``cI`` commute with everything, so they
    contribute ``w log c`` and the rest is the exponent of the renormalized
    remaining family scaled by its total weight.
    """
    if family.is_positive():
        return PipelineResult("Positive", compute_lyapunov(family, eps, r=r, N=N, M=M))
    sys = build_depth2(family, tol)
    ghc = detect_ghc_depth2(sys)
    if ghc:
        return PipelineResult("GhcDetected", witness=ghc.witness)
    skip = sys.excluded
    id_w = math.fsum(family.weights[i] for i in skip)
    id_part = math.fsum(
        family.weights[i] * math.log(float(family.matrices[i].a)) for i in skip
    )
    if len(skip) == len(family):
        cv = CertifiedValue(id_part, 0.0, 1, 2, 0.0)
        return PipelineResult("Positive", cv, identity_part=id_part, identity_weight=id_w)
    rest = _restrict(family, skip) if skip else family
    if rest.is_positive():
        inner = compute_lyapunov(rest, eps / (1 - id_w), r=r, N=N, M=M)
        status, P, arc = "Positive", None, None
    else:
        arc = find_invariant_arc(rest, tol)
        if refine:
            arc = refine_arc(rest, arc)
        conj = conjugate_to_positive(rest, arc)
        P = conj.P
        inner = compute_lyapunov(
            WeightedFamily(conj.positive_images, rest.weights), eps / (1 - id_w), r=r, N=N, M=M
        )
        status = "Conjugated"
    cv = inner
    if skip:
        cv = CertifiedValue(
            id_part + (1 - id_w) * inner.estimate,
            (1 - id_w) * inner.truncation_bound,
            inner.N,
            inner.M,
            inner.r_used,
        )
    return PipelineResult(status, cv, P, arc, identity_part=id_part, identity_weight=id_w)
