"""Exact Poisson-Binomial distribution and the inequalities the runtime proof relies on.

The distribution of ``Y = Y_1 + ... + Y_n`` for independent ``Y_i ~ Bernoulli(p_i)``
is computed exactly by convolving one Bernoulli factor at a time into a
length ``n + 1`` table. Everything else in this module is a predicate built on
that table and returns an :class:`InequalityReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from umdakit.errors import InvalidInputError, PreconditionError

INTEGER_MEAN_TOL = 1e-9
ANTICONCENTRATION_SLACK = 1e-9


@dataclass(frozen=True)
class PoissonBinomial:
    """Sum of independent Bernoulli variables with success probabilities ``probs``."""

    probs: np.ndarray

    def __init__(self, probs: Sequence[float]):
        arr = np.array(probs, dtype=float).ravel()
        if arr.size == 0:
            raise InvalidInputError("a Poisson-Binomial needs at least one probability")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidInputError("success probabilities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of checking one inequality numerically.

    ``satisfied`` is decided by the producing predicate; the direction
    (``statistic <= bound`` or ``statistic >= bound``) is recorded in ``direction``.
    """

    name: str
    statistic: float
    bound: float
    satisfied: bool
    direction: str = "<="
    witness: str | None = None
    details: dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.satisfied


def range_variable(marginals: Sequence[float], first: int, last: int) -> PoissonBinomial | None:
    """The variable ``Y_{first,last}`` over 1-based inclusive positions.

    Returns ``None`` for an empty range, which callers treat as the constant 0.
    """
    marginals = np.asarray(marginals, dtype=float)
    if first < 1 or last > marginals.size:
        raise InvalidInputError(f"range [{first}, {last}] outside 1..{marginals.size}")
    if last < first:
        return None
    return PoissonBinomial(marginals[first - 1 : last])


def pmf(d: PoissonBinomial) -> np.ndarray:
    """Return ``Pr(Y = y)`` for ``y = 0..n``."""
    table = np.zeros(d.n + 1)
    table[0] = 1.0
    for i, p in enumerate(d.probs, start=1):
        # table[:i] holds the law of the first i-1 variables; rhs is evaluated before assignment
        table[1 : i + 1] = table[1 : i + 1] * (1.0 - p) + table[:i] * p
        table[0] *= 1.0 - p
    return table


def tail_geq(d: PoissonBinomial, y: int) -> float:
    """``Pr(Y >= y)`` for ``0 <= y <= n + 1``."""
    if not isinstance(y, (int, np.integer)) or y < 0 or y > d.n + 1:
        raise InvalidInputError(f"tail index {y!r} outside 0..{d.n + 1}")
    if y == 0:
        return 1.0
    if y == d.n + 1:
        return 0.0
    return float(min(1.0, math.fsum(pmf(d)[y:])))


def mean_variance(d: PoissonBinomial) -> tuple[float, float]:
    p = d.probs
    return math.fsum(p), math.fsum(p * (1.0 - p))


def _eta_integrand(lam: float, series_tol: float) -> float:
    """``sqrt(2 lam) * exp(-2 lam) * sum_k (lam^k / k!)^2``, summed in log space."""
    if lam <= 0.0:
        return 0.0
    log_lam = math.log(lam)
    total = 0.0
    k = 0
    while True:
        term = math.exp(2.0 * (k * log_lam - math.lgamma(k + 1)) - 2.0 * lam)
        total += term
        # terms rise until k ~ lam, so only stop on the decreasing side
        if k > lam and term < series_tol:
            break
        k += 1
    return math.sqrt(2.0 * lam) * total


def compute_eta(series_tol: float = 1e-15, search_tol: float = 1e-10) -> float:
    """The anti-concentration constant ``max_{lam >= 0} sqrt(2 lam) e^{-2 lam} sum_k (lam^k/k!)^2``.

    A coarse grid scan brackets the maximiser, then golden-section search
    refines it to ``search_tol``.
    """
    if series_tol <= 0 or search_tol <= 0:
        raise InvalidInputError("tolerances must be positive")
    return _compute_eta_cached(float(series_tol), float(search_tol))


@lru_cache(maxsize=8)
def _compute_eta_cached(series_tol: float, search_tol: float) -> float:
    grid = np.linspace(0.0, 20.0, 401)
    values = [_eta_integrand(x, series_tol) for x in grid]
    best = int(np.argmax(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    res = minimize_scalar(
        lambda x: -_eta_integrand(x, series_tol),
        bracket=(lo, grid[best], hi),
        method="golden",
        tol=search_tol,
    )
    return max(-float(res.fun), values[best])


def check_anticoncentration(d: PoissonBinomial, eta: float | None = None) -> InequalityReport:
    """``sigma * max_y Pr(Y = y) <= eta``."""
    if eta is None:
        eta = compute_eta()
    table = pmf(d)
    _, var = mean_variance(d)
    y_star = int(np.argmax(table))
    stat = math.sqrt(var) * float(table[y_star])
    return InequalityReport(
        name="anticoncentration",
        statistic=stat,
        bound=eta,
        satisfied=stat <= eta + ANTICONCENTRATION_SLACK,
        direction="<=",
        witness=f"y={y_star}",
        details={"sigma": math.sqrt(var), "max_pmf": float(table[y_star])},
    )


def prob_greater_than(d: PoissonBinomial, x: float) -> float:
    """``Pr(Y > x)`` for real ``x``, summing the integer support strictly above ``x``."""
    nearest = round(x)
    if abs(x - nearest) < INTEGER_MEAN_TOL:
        x = float(nearest)
    first = math.floor(x) + 1
    if first <= 0:
        return 1.0
    if first > d.n:
        return 0.0
    return tail_geq(d, first)


def check_feige(d: PoissonBinomial, delta_shift: float) -> InequalityReport:
    """``Pr(Y > E[Y] - delta) >= min(1/13, delta / (1 + delta))``."""
    if not delta_shift > 0:
        raise InvalidInputError(f"shift must be positive, got {delta_shift!r}")
    mean, _ = mean_variance(d)
    stat = prob_greater_than(d, mean - delta_shift)
    bound = min(1.0 / 13.0, delta_shift / (1.0 + delta_shift))
    return InequalityReport(
        name="feige",
        statistic=stat,
        bound=bound,
        satisfied=stat >= bound,
        direction=">=",
        witness=f"threshold={mean - delta_shift:.6g}",
        details={"mean": mean, "delta": delta_shift},
    )


def check_integer_mean_median(d: PoissonBinomial) -> InequalityReport:
    """``Pr(Y >= E[Y]) >= 1/2`` when the mean is an integer."""
    mean, _ = mean_variance(d)
    target = round(mean)
    if abs(mean - target) > INTEGER_MEAN_TOL:
        raise PreconditionError(f"mean {mean!r} is not an integer")
    stat = tail_geq(d, int(target))
    return InequalityReport(
        name="integer_mean_median",
        statistic=stat,
        bound=0.5,
        satisfied=stat >= 0.5,
        direction=">=",
        witness=f"mean={int(target)}",
    )


# --- random instance families for batteries ----------------------------------


def random_probs(n: int, rng: np.random.Generator) -> np.ndarray:
    """A mix of uniform, near-degenerate and two-sided Poisson-like vectors.

    The last family (half the mass near 0, half near 1) is where
    ``sigma * max_y Pr(Y = y)`` comes closest to its supremum.
    """
    family = rng.integers(0, 4)
    if family == 0:
        return rng.random(n)
    if family == 1:
        p = rng.random(n) ** 3
        return np.where(rng.random(n) < 0.5, p, 1.0 - p)
    if family == 2:
        p = rng.random(n)
        p[rng.random(n) < 0.3] = rng.integers(0, 2)
        return p
    rate = rng.uniform(0.05, 3.0)
    half = max(n // 2, 1)
    p = np.full(n, min(rate / half, 1.0))
    p[: n - half] = 1.0 - p[: n - half]
    return p


def integer_mean_probs(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random probabilities in [0, 1] whose sum is an integer.

    A uniform draw is shifted by a common offset (clipped to [0, 1]) found by
    bisection, then the last rounding residue is absorbed by one coordinate.
    """
    u = rng.random(n)
    target = int(rng.integers(0, n + 1))
    lo, hi = -1.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(u + mid, 0.0, 1.0).sum() < target:
            lo = mid
        else:
            hi = mid
    p = np.clip(u + hi, 0.0, 1.0)
    residue = target - math.fsum(p)
    room = np.flatnonzero((p + residue >= 0.0) & (p + residue <= 1.0))
    if room.size:
        p[room[0]] += residue
    return p


def pb_batteries(trials: int, n_max: int, rng: np.random.Generator) -> dict[str, list[InequalityReport]]:
    """Anti-concentration, Feige and integer-mean checks on ``trials`` random instances each."""
    eta = compute_eta()
    out: dict[str, list[InequalityReport]] = {"anticoncentration": [], "feige": [], "integer_mean_median": []}
    for _ in range(trials):
        d = PoissonBinomial(random_probs(int(rng.integers(1, n_max + 1)), rng))
        out["anticoncentration"].append(check_anticoncentration(d, eta))
    for _ in range(trials):
        d = PoissonBinomial(random_probs(int(rng.integers(1, n_max + 1)), rng))
        shift = float(3.0 * (1.0 - rng.random()))
        out["feige"].append(check_feige(d, shift))
    for _ in range(trials):
        d = PoissonBinomial(integer_mean_probs(int(rng.integers(1, n_max + 1)), rng))
        out["integer_mean_median"].append(check_integer_mean_median(d))
    return out
