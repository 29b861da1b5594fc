"""Independent references: Monte Carlo products and exact word enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .kernel import WeightedFamily
from .projective import apply_F

WORD_BUDGET = 10 ** 7
MIN_STEPS = 1000


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    steps: int
    trials: int
    seed: int
    per_trial: tuple[float, ...] = ()


def burn_in(steps: int) -> int:
    return min(1000, steps // 10)


@numba.njit(cache=True)
def _run_trial(mats, idx, x0, y0, burn):
    # l1-renormalized power iteration; growth is accumulated as a product
    # and flushed into a compensated log-sum when it leaves a safe range
    x, y = x0, y0
    s = abs(x) + abs(y)
    x /= s
    y /= s
    total = 0.0
    comp = 0.0
    acc = 1.0
    n = idx.shape[0]
    for t in range(n):
        k = idx[t]
        nx = mats[k, 0, 0] * x + mats[k, 0, 1] * y
        ny = mats[k, 1, 0] * x + mats[k, 1, 1] * y
        s = abs(nx) + abs(ny)
        if not (s > 0.0 and s < np.inf):
            return np.nan
        x = nx / s
        y = ny / s
        if t >= burn:
            acc *= s
            if acc > 1e150 or acc < 1e-150 or t == n - 1:
                term = math.log(acc) - comp
                tmp = total + term
                comp = (tmp - total) - term
                total = tmp
                acc = 1.0
    if n > burn and acc != 1.0:
        total += math.log(acc)
    return total / (n - burn)


def mc_lyapunov(
    matrices: Sequence, weights: Sequence[float] | None, steps: int = 100_000, trials: int = 64, seed: int = 0
) -> McEstimate:
    """Estimate of the top exponent from ``trials`` independent random products.

    Trial ``t`` draws from a Philox stream keyed by ``seed ^ t``.  The first
    ``min(1000, steps // 10)`` steps only align the vector; per-trial values
    average the log growth over the remaining steps.
    """
    if steps < MIN_STEPS:
        raise PreconditionError(f"steps must be at least {MIN_STEPS}")
    if trials < 2:
        raise PreconditionError("need at least two trials for a standard error")
    mats = np.array(
        [m.to_array() if hasattr(m, "to_array") else np.asarray(m, dtype=float).reshape(2, 2) for m in matrices]
    )
    n = len(mats)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != n or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
        raise PreconditionError("weights must be positive and sum to 1")
    if np.any(np.abs(np.linalg.det(mats)) <= 1e-300):
        raise PreconditionError("matrices must be invertible")
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    burn = burn_in(steps)
    seed = int(seed) & (2 ** 64 - 1)
    vals = np.empty(trials)
    for t in range(trials):
        rng = np.random.Generator(np.random.Philox(key=seed ^ t))
        theta = rng.uniform(0.0, 2 * math.pi)
        idx = np.searchsorted(cdf, rng.random(steps), side="right").astype(np.int64)
        np.minimum(idx, n - 1, out=idx)
        vals[t] = _run_trial(mats, idx, math.cos(theta), math.sin(theta), burn)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("product norm overflowed or vanished despite renormalization")
    mean = math.fsum(vals) / trials
    std = math.sqrt(math.fsum((vals - mean) ** 2) / (trials - 1))
    return McEstimate(mean, std / math.sqrt(trials), steps, trials, seed, tuple(vals.tolist()))


def word_partial_sum(family: WeightedFamily, n: int, size: int = 1) -> np.ndarray:
    """``sum_{j<n} T^j v`` (first ``size`` coordinates) by summing over all words of length n.

    Coordinate 0 is ``sum_w w log(q1(i_n) f_{prefix}(0) + q2(i_n))``; coordinate
    ``k >= 1`` is ``-sum_w w (-f_w(0))^k / k``.
    """
    if n < 1:
        raise PreconditionError("n must be at least 1")
    m = len(family)
    if m ** n > WORD_BUDGET:
        raise BudgetExceeded(f"{m}^{n} words exceed the budget of {WORD_BUDGET}")
    F = [apply_F(A.to_float()) for A in family.matrices]
    p1 = np.array([f.a for f in F])
    p2 = np.array([f.b for f in F])
    q1 = np.array([f.c for f in F])
    q2 = np.array([f.d for f in F])
    w = np.array(family.weights)
    x = np.zeros(1)
    W = np.ones(1)
    for _ in range(n - 1):
        den = q1[:, None] * x[None, :] + q2[:, None]
        if np.any(den <= 0):
            raise PreconditionError("denominator q1 x + q2 is not positive along an orbit")
        x = ((p1[:, None] * x[None, :] + p2[:, None]) / den).ravel()
        W = (w[:, None] * W[None, :]).ravel()
    den = q1[:, None] * x[None, :] + q2[:, None]
    if np.any(den <= 0):
        raise PreconditionError("denominator q1 x + q2 is not positive along an orbit")
    Wn = (w[:, None] * W[None, :]).ravel()
    out = np.zeros(size)
    out[0] = math.fsum((Wn * np.log(den.ravel())).tolist())
    if size > 1:
        xn = ((p1[:, None] * x[None, :] + p2[:, None]) / den).ravel()
        for k in range(1, size):
            out[k] = -math.fsum((Wn * (-xn) ** k).tolist()) / k
    return out
