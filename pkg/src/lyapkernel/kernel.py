"""Kernel-expansion series for the top Lyapunov exponent of positive families.

For entrywise positive invertible ``A_i`` with weights ``w_i`` the exponent is
``sum_n (T^n v)_0`` for an explicit infinite matrix ``T`` and vector ``v``.
This module builds the ``M x M`` truncation, sums ``N`` terms and attaches
the a-priori truncation bound.  Round-off is not part of the bound.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import NotStrictlyContracting, PreconditionError
from .projective import Matrix2, apply_F, as_matrix, hyperbolic_distance

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-9
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WeightedFamily:
    matrices: tuple[Matrix2, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        mats = tuple(as_matrix(m) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not mats:
            raise PreconditionError("empty family")
        if len(mats) != len(self.weights):
            raise PreconditionError(
                f"{len(mats)} matrices but {len(self.weights)} weights"
            )
        if any(w <= 0 for w in self.weights):
            raise PreconditionError("weights must be strictly positive")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_TOL:
            raise PreconditionError(f"weights sum to {math.fsum(self.weights)!r}, not 1")
        for i, m in enumerate(mats):
            if not m.is_invertible():
                raise PreconditionError(f"matrix {i} is singular")

    @classmethod
    def uniform(cls, matrices: Sequence) -> "WeightedFamily":
        n = len(matrices)
        return cls(tuple(matrices), (1.0 / n,) * n)

    @classmethod
    def create(cls, matrices: Sequence, weights: Optional[Sequence[float]] = None) -> "WeightedFamily":
        if weights is None:
            return cls.uniform(matrices)
        return cls(tuple(matrices), tuple(weights))

    def __len__(self) -> int:
        return len(self.matrices)

    def is_positive(self) -> bool:
        return all(m.is_positive() for m in self.matrices)

    def is_nonnegative(self) -> bool:
        return all(m.is_nonnegative() for m in self.matrices)

    def scaled(self, t: float) -> "WeightedFamily":
        return WeightedFamily(tuple(m * t for m in self.matrices), self.weights)

    def transposed(self) -> "WeightedFamily":
        return WeightedFamily(tuple(m.T for m in self.matrices), self.weights)

    def conjugated(self, P: Matrix2) -> "WeightedFamily":
        Pinv = P.inverse()
        return WeightedFamily(tuple(P @ m @ Pinv for m in self.matrices), self.weights)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        mats = np.array([m.to_array() for m in self.matrices])
        return mats, np.array(self.weights)


@dataclass(frozen=True)
class MapData:
    """Per-map scalars of ``F(A_i) = [[p1, p2], [q1, q2]]`` used throughout."""

    p1: np.ndarray
    p2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    det: np.ndarray
    w: np.ndarray

    @property
    def f0(self) -> np.ndarray:
        return self.p2 / self.q2

    @property
    def ft0(self) -> np.ndarray:
        return self.q1 / self.q2

    @property
    def fp0(self) -> np.ndarray:
        return self.det / self.q2 ** 2

    def image_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        lo = (self.p2 - self.p1) / (self.q2 - self.q1)
        hi = (self.p1 + self.p2) / (self.q1 + self.q2)
        return lo, hi


def map_data(family: WeightedFamily, require_positive: bool = True) -> MapData:
    if require_positive and not family.is_positive():
        raise PreconditionError(
            "kernel expansion needs entrywise positive matrices; positivize the family first"
        )
    F = [apply_F(m.to_float()) for m in family.matrices]
    p1 = np.array([f.a for f in F])
    p2 = np.array([f.b for f in F])
    q1 = np.array([f.c for f in F])
    q2 = np.array([f.d for f in F])
    det = p1 * q2 - p2 * q1
    return MapData(p1, p2, q1, q2, det, np.array(family.weights))


def choose_r(family: WeightedFamily, margin: float = DEFAULT_MARGIN) -> float:
    """Contraction radius: every ``f_i`` maps [-1, 1] into [-r, r].

    Each ``f_i`` is monotone on [-1, 1] (no pole there), so the endpoint
    images bound the whole image.
    """
    md = map_data(family, require_positive=False)
    if np.any(md.q2 - np.abs(md.q1) <= 0):
        raise NotStrictlyContracting("a projective map has a pole in [-1, 1]")
    lo, hi = md.image_endpoints()
    worst = float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))
    if worst >= 1 - 2 * margin:
        raise NotStrictlyContracting(
            f"max |f_i(+-1)| = {worst!r} is not below 1; positivize the family first"
        )
    return min(1 - margin, worst + margin)


@lru_cache(maxsize=8)
def pascal(n: int) -> np.ndarray:
    """Binomial table ``C[i, j]`` for ``0 <= j <= i <= n`` in floating point."""
    if n > 1020:
        raise OverflowError(f"binomial coefficients up to {n} overflow double precision")
    C = np.zeros((n + 1, n + 1))
    C[:, 0] = 1.0
    for i in range(1, n + 1):
        C[i, 1 : i + 1] = C[i - 1, 0:i] + C[i - 1, 1 : i + 1]
    C.setflags(write=False)
    return C


def _map_series(p1: float, p2: float, q1: float, q2: float, M: int) -> np.ndarray:
    """Taylor coefficients of ``(p1 x + p2)/(q1 x + q2)`` at 0, degree < M."""
    g = (-q1 / q2) ** np.arange(M)
    out = p2 * g
    out[1:] += p1 * g[:-1]
    return out / q2


def build_T(family: WeightedFamily, M: int) -> np.ndarray:
    """Upper-left ``M x M`` block of the kernel matrix.

    Rows ``k >= 1`` come from Taylor coefficients of ``(-f_i(x))^k``:
    ``b[k, n] = (-1)^n n / k * [x^n] sum_i w_i (-f_i(x))^k``.  The series
    coefficients are bounded by ``r^k`` so this route does not cancel.
    """
    if M < 2:
        raise PreconditionError("M must be at least 2")
    md = map_data(family)
    n = np.arange(M)
    sign_n = np.where(n % 2 == 0, 1.0, -1.0) * n
    T = np.zeros((M, M))
    for i in range(len(md.w)):
        u = -_map_series(md.p1[i], md.p2[i], md.q1[i], md.q2[i], M)
        power = np.zeros(M)
        power[0] = 1.0
        wi = md.w[i]
        for k in range(1, M):
            power = np.convolve(power, u)[:M]
            T[k, 1:] += (wi / k) * sign_n[1:] * power[1:]
        T[0, 1:] += wi * md.ft0[i] ** n[1:]
    return T


def build_T_combinatorial(family: WeightedFamily, M: int) -> np.ndarray:
    """Same block from the closed binomial double sum (compensated summation).

    Kept as an independent cross-check of :func:`build_T`; it loses digits
    for large ``k, n``.
    """
    if M < 2:
        raise PreconditionError("M must be at least 2")
    md = map_data(family)
    C = pascal(M)
    T = np.zeros((M, M))
    for n in range(1, M):
        T[0, n] = math.fsum(md.w * md.ft0 ** n)
    for i in range(len(md.w)):
        ft, a, fp, wi = md.ft0[i], -md.f0[i], md.fp0[i], md.w[i]
        ftp = ft ** np.arange(M)
        ap = a ** np.arange(M)
        fpp = fp ** np.arange(M)
        for k in range(1, M):
            for n in range(1, M):
                terms = [
                    C[n, l] * C[k - 1, l - 1] * ftp[n - l] * ap[k - l] * fpp[l]
                    for l in range(1, min(k, n) + 1)
                ]
                T[k, n] += wi * math.fsum(terms)
    return T


SELF_CHECK_RTOL = 1e-9
SELF_CHECK_SIZE = 61


def T_path_discrepancy(family: WeightedFamily, M: int = SELF_CHECK_SIZE) -> float:
    """Largest gap between the two constructions of T, relative to ``max |T|``."""
    T1 = build_T(family, M)
    T2 = build_T_combinatorial(family, M)
    scale = float(np.max(np.abs(T1))) or 1.0
    return float(np.max(np.abs(T1 - T2))) / scale


def self_check(family: WeightedFamily, M: int = SELF_CHECK_SIZE) -> None:
    gap = T_path_discrepancy(family, M)
    if gap > SELF_CHECK_RTOL:
        raise AssertionError(f"kernel matrix constructions disagree: relative gap {gap:.3g}")


def build_v(family: WeightedFamily, M: int) -> np.ndarray:
    md = map_data(family)
    v = np.zeros(M)
    v[0] = math.fsum(md.w * np.log(md.q2))
    alt = 0.5 * np.log(md.det / md.fp0)
    if not np.allclose(alt, np.log(md.q2), rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(alt))))):
        raise AssertionError("log q2 and 1/2 log(det F / f'(0)) disagree")
    for n in range(1, M):
        v[n] = -math.fsum(md.w * (-md.f0) ** n) / n
    return v


def kr_bound(r: float) -> float:
    """Upper bound on ``K(r) = (1/2pi) \\oint_{|z|=r} |dz| / |1 - z|``."""
    if r <= 0:
        return 0.0
    a = r / math.sqrt(1 - r * r)
    b = 2 * r / (math.pi * (1 + r)) * (math.pi / 2 + math.log((1 + r) / (1 - r)))
    return min(a, b)


def error_constants(family: WeightedFamily, r: float) -> tuple[float, float, float]:
    """Return ``(E, C, Kr)``: tail constant, ``max |f_i^T(0)|`` and the K(r) bound."""
    md = map_data(family)
    ft = np.abs(md.ft0)
    lip = math.fsum(md.w * ft / (1 + np.sqrt(1 - ft ** 2)))
    spread = math.fsum(w * hyperbolic_distance(float(x), 0.0) for w, x in zip(md.w, md.f0))
    E = lip * spread / (1 - r)
    C = float(np.max(ft))
    return E, C, kr_bound(r)


def _growth_term(n: int, rho: float) -> float:
    # ((1 + rho)^(n-1) - 1 - (n-1) rho) / rho, summed termwise (all positive)
    if rho == 0.0:
        return 0.0
    terms = []
    coef = 1.0
    for j in range(2, n):
        coef = math.comb(n - 1, j)
        t = coef * rho ** (j - 1)
        terms.append(t)
        if t < 1e-300:
            break
    return math.fsum(terms)


def bound_from_constants(E: float, C: float, Kr: float, r: float, n: int, m: int) -> float:
    if n < 2 or m < 2:
        raise PreconditionError("truncation bound needs n, m >= 2")
    rho = r ** (m - 1) * Kr
    tail = E * r ** (n - 1)
    growth = 2 * math.log(1 / (1 - r * C)) * _growth_term(n, rho)
    last = 2 * (n - 1) * (r * C) ** m / (m * (1 - r * C))
    return tail + growth + last


@dataclass(frozen=True)
class KernelSystem:
    family: WeightedFamily
    r: float
    T: np.ndarray
    v: np.ndarray
    C: float
    E: float
    Kr: float

    @property
    def M(self) -> int:
        return len(self.v)


def build_kernel_system(
    family: WeightedFamily, M: int, r: Optional[float] = None, margin: float = DEFAULT_MARGIN
) -> KernelSystem:
    if r is None:
        r = choose_r(family, margin)
    else:
        md = map_data(family)
        lo, hi = md.image_endpoints()
        if max(np.max(np.abs(lo)), np.max(np.abs(hi))) > r or not 0 < r < 1:
            raise PreconditionError(f"r = {r!r} does not contain every f_i([-1, 1])")
    E, C, Kr = error_constants(family, r)
    return KernelSystem(family, r, build_T(family, M), build_v(family, M), C, E, Kr)


def truncation_bound(ks: KernelSystem, n: int, m: int) -> float:
    return bound_from_constants(ks.E, ks.C, ks.Kr, ks.r, n, m)


def partial_sum(ks: KernelSystem, N: int) -> float:
    """``sum_{n<N} (T_M^n v)_0`` by ``N - 1`` matrix-vector products."""
    if N < 1:
        raise PreconditionError("N must be at least 1")
    u = ks.v
    total = float(u[0])
    for _ in range(N - 1):
        u = ks.T @ u
        total += float(u[0])
    return total


def select_parameters(family: WeightedFamily, r: float, eps: float) -> tuple[int, int]:
    """Pick ``(N, M)`` with certified truncation bound below ``eps``.

    Start from the sufficient conditions used in the convergence proof, then
    greedily trim ``N`` and ``M`` while the exact bound stays below ``eps``.
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    E, C, Kr = error_constants(family, r)
    N = 2
    while E * r ** (N - 1) >= eps / 2:
        N += 1
    L = math.log(1 / (1 - r * C))
    M = 2
    while True:
        rho = r ** (M - 1) * Kr
        lhs = math.e * L * (N - 1) ** 2 * rho + 2 * (N - 1) * (r * C) ** M / (M * (1 - r * C))
        if (N - 1) * rho <= 1 and lhs < eps / 2:
            break
        M += 1
    bound = lambda n, m: bound_from_constants(E, C, Kr, r, n, m)  # noqa: E731
    assert bound(N, M) < eps
    changed = True
    while changed:
        changed = False
        if N > 2 and bound(N - 1, M) < eps:
            N -= 1
            changed = True
        if M > 2 and bound(N, M - 1) < eps:
            M -= 1
            changed = True
    return N, M


@dataclass(frozen=True)
class CertifiedValue:
    estimate: float
    truncation_bound: float
    N: int
    M: int
    r_used: float
    extra: dict = field(default_factory=dict, compare=False)


def compute_lyapunov(
    family: WeightedFamily,
    eps: float = 1e-10,
    margin: float = DEFAULT_MARGIN,
    *,
    r: Optional[float] = None,
    N: Optional[int] = None,
    M: Optional[int] = None,
) -> CertifiedValue:
    """Certified-truncation estimate of the top Lyapunov exponent.

    ``r``, ``N`` and ``M`` may be pinned (replay); otherwise they are chosen
    so that the truncation bound is below ``eps``.
    """
    if r is None:
        r = choose_r(family, margin)
    if N is None or M is None:
        N0, M0 = select_parameters(family, r, eps)
        N = N0 if N is None else N
        M = M0 if M is None else M
    ks = build_kernel_system(family, M, r=r)
    est = partial_sum(ks, N)
    bound = truncation_bound(ks, max(N, 2), M)
    log.debug("kernel sum: r=%.6g N=%d M=%d estimate=%.17g bound=%.3g", r, N, M, est, bound)
    return CertifiedValue(est, bound, N, M, r)
