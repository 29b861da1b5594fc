"""Dimension of intersections of base-b Cantor sets with their translates.

Digit sets are bit masks internally: bit ``d`` set means digit ``d`` is
allowed.  With that encoding ``A_i(j, k) = popcount((D1 << (i+j)) & (D2 << kb))``.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .kernel import WeightedFamily
from .positivize import (
    GhcWitness,
    arc_certifies,
    build_depth2,
    detect_ghc_depth2,
    lyapunov_nonnegative,
)
from .projective import Matrix2

log = logging.getLogger(__name__)

DEFAULT_MAX_B = 10
HARD_MAX_B = 16

DEGENERATE = "Degenerate"
GHC = "GhcDetected"
CERTIFIED = "Certified"


@dataclass(frozen=True)
class DigitPair:
    b: int
    D1: tuple[int, ...]
    D2: tuple[int, ...]

    def __post_init__(self):
        if self.b < 2:
            raise PreconditionError("base must be at least 2")
        for name in ("D1", "D2"):
            digits = tuple(sorted(set(int(d) for d in getattr(self, name))))
            if not digits:
                raise PreconditionError(f"{name} is empty")
            if digits[0] < 0 or digits[-1] >= self.b:
                raise PreconditionError(f"{name} has digits outside 0..{self.b - 1}")
            if len(digits) == self.b:
                raise PreconditionError(f"{name} must be a proper subset of the digits")
            object.__setattr__(self, name, digits)

    @classmethod
    def from_masks(cls, b: int, m1: int, m2: int) -> "DigitPair":
        return cls(b, mask_digits(m1), mask_digits(m2))

    @property
    def masks(self) -> tuple[int, int]:
        return digit_mask(self.D1), digit_mask(self.D2)


def digit_mask(digits: Iterable[int]) -> int:
    m = 0
    for d in digits:
        m |= 1 << d
    return m


def mask_digits(m: int) -> tuple[int, ...]:
    return tuple(d for d in range(m.bit_length()) if m >> d & 1)


def _matrices_from_masks(b: int, m1: int, m2: int) -> list[Matrix2]:
    # c[s] = |(D1 + s) & D2|, e[s] = |(D1 + s) & (D2 + b)|
    c = [((m1 << s) & m2).bit_count() for s in range(b + 1)]
    e = [((m1 << s) & (m2 << b)).bit_count() for s in range(b + 1)]
    return [Matrix2(c[i], e[i], c[i + 1], e[i + 1]) for i in range(b)]


def digit_matrices(pair: DigitPair) -> list[Matrix2]:
    return _matrices_from_masks(pair.b, *pair.masks)


def is_degenerate(pair: DigitPair) -> bool:
    return any(m.det == 0 for m in digit_matrices(pair))


@dataclass(frozen=True)
class DimensionResult:
    status: str
    pair: DigitPair
    lyapunov: Optional[float] = None
    dimension: Optional[float] = None
    bound: Optional[float] = None
    N: Optional[int] = None
    M: Optional[int] = None
    r: Optional[float] = None
    P: Optional[Matrix2] = None
    witness: Optional[GhcWitness] = None
    pipeline_status: Optional[str] = None


def intersection_dimension(
    pair: DigitPair, eps: float = 1e-10, *, r=None, N=None, M=None
) -> DimensionResult:
    """``dim = lambda / log b`` for a non-degenerate, heteroclinic-free pair."""
    if is_degenerate(pair):
        return DimensionResult(DEGENERATE, pair)
    family = WeightedFamily.uniform(digit_matrices(pair))
    logb = math.log(pair.b)
    res = lyapunov_nonnegative(family, eps * logb, r=r, N=N, M=M)
    if res.status == GHC:
        return DimensionResult(GHC, pair, witness=res.witness)
    cv = res.value
    return DimensionResult(
        CERTIFIED,
        pair,
        lyapunov=cv.estimate,
        dimension=cv.estimate / logb,
        bound=cv.truncation_bound / logb,
        N=cv.N,
        M=cv.M,
        r=cv.r_used,
        P=res.P,
        pipeline_status=res.status,
    )


def one_digit_forbidden_pair(b: int, tau: int, u: int) -> DigitPair:
    full = set(range(b))
    return DigitPair(b, tuple(full - {tau}), tuple(full - {u}))


def one_digit_forbidden_status(b: int, tau: int, u: int) -> str:
    if b < 5:
        raise PreconditionError("the one-digit-forbidden criterion needs b >= 5")
    if not (0 <= tau < b and 0 <= u < b):
        raise PreconditionError("forbidden digits must lie in 0..b-1")
    if {tau, u} & {0, b - 1} or tau + u != b - 1:
        return "degenerate"
    return "kernel_applicable"


def thick_rho(b: int) -> int:
    return (b - 3) // 5


def thick_family_status(pair: DigitPair) -> str:
    if pair.b < 3:
        raise PreconditionError("thick criterion needs b >= 3")
    need = pair.b - thick_rho(pair.b)
    if len(pair.D1) >= need and len(pair.D2) >= need:
        return "applicable"
    return "not_covered"


def thick_arc_certifies(pair: DigitPair) -> bool:
    """Exact check that [-1/2, 1/2] is strictly invariant for the digit family."""
    family = WeightedFamily.uniform(digit_matrices(pair))
    return arc_certifies(family, Fraction(-1, 2), Fraction(1, 2))


# ---------------------------------------------------------------- census


@dataclass(frozen=True)
class CensusRow:
    b: int
    all_pairs: int
    degenerate: int
    no_ghc: int
    records: tuple[tuple[int, int, str], ...] = field(default=(), compare=False, repr=False)

    @property
    def nondegenerate(self) -> int:
        return self.all_pairs - self.degenerate

    @property
    def degenerate_pct(self) -> float:
        return 100.0 * self.degenerate / self.all_pairs

    @property
    def no_ghc_pct(self) -> float:
        return 100.0 * self.no_ghc / self.nondegenerate if self.nondegenerate else 0.0

    def csv_row(self) -> str:
        return (
            f"{self.b},{self.all_pairs},{self.degenerate},{self.degenerate_pct:.2f},"
            f"{self.no_ghc},{self.no_ghc_pct:.2f}"
        )

    def detail_lines(self) -> list[str]:
        out = []
        for m1, m2, status in self.records:
            d1 = ",".join(map(str, mask_digits(m1)))
            d2 = ",".join(map(str, mask_digits(m2)))
            out.append(f"{d1} {d2} {status}")
        return out


CSV_HEADER = "b,all_pairs,degenerate,degenerate_pct,no_ghc,no_ghc_pct"


def nondegenerate_mask_pairs(b: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered proper mask pairs and a boolean non-degeneracy grid.

    Vectorized over pairs: ``det A_i = c_i e_{i+1} - e_i c_{i+1}``.
    """
    masks = np.arange(1, 2 ** b - 1, dtype=np.int64)
    m1 = masks[:, None]
    m2 = masks[None, :]
    c = [np.bitwise_count((m1 << s) & m2).astype(np.int16) for s in range(b + 1)]
    e = [np.bitwise_count((m1 << s) & (m2 << b)).astype(np.int16) for s in range(b + 1)]
    ok = np.ones((len(masks), len(masks)), dtype=bool)
    for i in range(b):
        ok &= c[i] * e[i + 1] != e[i] * c[i + 1]
    return masks, ok


def ghc_free(b: int, m1: int, m2: int, legacy_rule: bool = False) -> bool:
    family = WeightedFamily.uniform(_matrices_from_masks(b, m1, m2))
    return not detect_ghc_depth2(build_depth2(family), single_neutral_only=legacy_rule)


def _ghc_chunk(args) -> list[bool]:
    b, pairs, legacy = args
    return [ghc_free(b, m1, m2, legacy) for m1, m2 in pairs]


def census(
    b: int,
    threads: Optional[int] = 1,
    allow_large: bool = False,
    detail: bool = False,
    legacy_rule: bool = False,
) -> CensusRow:
    """Count degenerate and heteroclinic-free pairs over all proper digit-set pairs.

    ``legacy_rule`` ignores parabolic/involutive products of length two.  The
    default rule counts them as connections, which is what the definition
    says; the two agree for b <= 8 and differ by 6 (b=9) and 4 (b=10).
    """
    limit = HARD_MAX_B if allow_large else DEFAULT_MAX_B
    if not 4 <= b <= limit:
        raise PreconditionError(f"census base must be in 4..{limit} (got {b})")
    masks, ok = nondegenerate_mask_pairs(b)
    n = len(masks)
    idx = np.argwhere(ok)
    pairs = [(int(masks[i]), int(masks[j])) for i, j in idx]
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(pairs) > 64:
        size = max(1, len(pairs) // (threads * 4))
        chunks = [(b, pairs[k : k + size], legacy_rule) for k in range(0, len(pairs), size)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            flags = [f for chunk in pool.map(_ghc_chunk, chunks) for f in chunk]
    else:
        flags = _ghc_chunk((b, pairs, legacy_rule))
    records: tuple = ()
    if detail:
        status = {p: ("OK" if f else "GHC") for p, f in zip(pairs, flags)}
        records = tuple(
            (int(masks[i]), int(masks[j]), status.get((int(masks[i]), int(masks[j])), "DEGEN"))
            for i in range(n)
            for j in range(n)
        )
    return CensusRow(b, n * n, n * n - len(pairs), sum(flags), records)
