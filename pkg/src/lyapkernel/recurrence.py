"""Growth rate of random recurrences ``x_{n+1} = a x_n + b x_{n-1}``.

Each step picks ``(a_i, b_i)`` with probability ``w_i``.  The companion
matrices ``[[0, 1], [b, a]]`` have zeros, but every product of two of them is
positive, so the kernel expansion applies to the two-step family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import PreconditionError
from .kernel import CertifiedValue, WeightedFamily, compute_lyapunov
from .positivize import lyapunov_nonnegative
from .projective import Matrix2


@dataclass(frozen=True)
class RecurrenceSpec:
    pairs: tuple[tuple[float, float], ...]
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        pairs = tuple((a, b) for a, b in self.pairs)
        if not pairs:
            raise PreconditionError("no coefficient pairs")
        for i, (a, b) in enumerate(pairs):
            if not a > 0:
                raise PreconditionError(
                    f"pair {i}: a = {a!r} must be positive; a zero or negative a yields a "
                    "heteroclinic connection and the kernel path does not apply"
                )
            if not b > 0:
                raise PreconditionError(
                    f"pair {i}: b = {b!r} must be positive; b = 0 makes the companion matrix singular"
                )
        weights = tuple(self.weights) or (1.0 / len(pairs),) * len(pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "weights", weights)

    def companions(self) -> list[Matrix2]:
        return [Matrix2(0, 1, b, a) for a, b in self.pairs]

    def family(self) -> WeightedFamily:
        return WeightedFamily(tuple(self.companions()), self.weights)

    def two_step_family(self) -> WeightedFamily:
        Ms = self.companions()
        mats, ws = [], []
        for i, Mi in enumerate(Ms):
            for j, Mj in enumerate(Ms):
                mats.append(Mi @ Mj)
                ws.append(self.weights[i] * self.weights[j])
        return WeightedFamily(tuple(mats), tuple(ws))


def growth_rate(
    spec: RecurrenceSpec,
    eps: float = 1e-10,
    route: str = "pairs",
    *,
    r: Optional[float] = None,
    N: Optional[int] = None,
    M: Optional[int] = None,
) -> CertifiedValue:
    """Almost-sure limit of ``|x_n|^(1/n)`` with an exp-propagated bound.

    ``route="pairs"`` uses the positive two-step family; ``route="direct"``
    positivizes the companion matrices themselves (cross-check).
    """
    if route == "pairs":
        fam = spec.two_step_family()
        if not fam.is_positive():
            raise AssertionError("two-step products must be positive for positive coefficients")
        cv = compute_lyapunov(fam, 2 * eps, r=r, N=N, M=M)
        lam, bound = cv.estimate / 2, cv.truncation_bound / 2
    elif route == "direct":
        res = lyapunov_nonnegative(spec.family(), eps, r=r, N=N, M=M)
        if not res.certified:
            raise PreconditionError(f"direct route not certifiable: {res.witness.describe()}")
        cv = res.value
        lam, bound = cv.estimate, cv.truncation_bound
    else:
        raise PreconditionError(f"unknown route {route!r}")
    g = math.exp(lam)
    return CertifiedValue(
        g, g * math.expm1(bound), cv.N, cv.M, cv.r_used, extra={"lyapunov": lam, "route": route}
    )
