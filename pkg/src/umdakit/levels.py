"""Level-based analysis of UMDA on OneMax, made numerically checkable.

Levels are the canonical OneMax partition: level ``j`` holds the strings with
``j - 1`` one-bits, so there are ``n + 1`` levels. The checkers take the column
sums ``X_i`` of the ``mu`` selected individuals, rebuild the next model with
margin ``mu / n`` and compare exact upgrade probabilities with the bounds used
in the runtime argument.

Positions are grouped rather than physically rearranged: *interior*
(``1 <= X_i <= mu - 1``), *upper border* (``X_i = mu``) and *lower border*
(``X_i = 0``), with sizes ``k``, ``l`` and ``n - k - l``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from umdakit.errors import InvalidInputError, InvalidParameterError, PreconditionError
from umdakit.model import ProbabilisticModel, classify_positions, marginals_from_sums
from umdakit.pbdist import (
    InequalityReport,
    PoissonBinomial,
    compute_eta,
    mean_variance,
    pmf,
    tail_geq,
)
from umdakit.umda import UmdaParams

E = math.e
# slack for comparisons between exact probabilities and closed-form bounds
PROB_TOL = 1e-12


class Case(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"


@dataclass(frozen=True)
class LevelParams:
    m: int
    gamma0: float
    delta: float
    c: float
    z: tuple[float, ...]
    gamma: float | None = None
    z_star: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma0 < 1:
            raise InvalidParameterError(f"gamma0 must lie in (0, 1), got {self.gamma0}")
        if not 0 < self.delta <= 1:
            raise InvalidParameterError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0 < self.c < 1:
            raise InvalidParameterError(f"c must lie in (0, 1), got {self.c}")
        if len(self.z) != self.m - 1:
            raise InvalidParameterError(f"need m-1={self.m - 1} upgrade bounds, got {len(self.z)}")
        if any(not 0 < zj <= 1 for zj in self.z):
            raise InvalidParameterError("every z_j must lie in (0, 1]")
        if self.gamma is not None and not 0 < self.gamma <= self.gamma0:
            raise InvalidParameterError(f"gamma must lie in (0, gamma0], got {self.gamma}")
        object.__setattr__(self, "z_star", min(self.z))

    @classmethod
    def for_umda(cls, n: int, mu: int, lam: int, c: float, delta: float | None = None) -> "LevelParams":
        """Parameters used for UMDA on OneMax: ``gamma0 = mu/lam`` and ``delta = c/(1-c)`` capped at 1."""
        if delta is None:
            delta = min(1.0, c / (1.0 - c))
        z = tuple(z_lower_bound(n, j, c) for j in range(1, n + 1))
        return cls(m=n + 1, gamma0=mu / lam, delta=delta, c=c, z=z)


def level_of(fitness_value: int, n: int) -> int:
    if not 0 <= fitness_value <= n:
        raise InvalidInputError(f"OneMax value {fitness_value} outside 0..{n}")
    return int(fitness_value) + 1


def upgrade_probability(model: ProbabilisticModel | Sequence[float], j: int) -> float:
    """``Pr(Y_{1,n} >= j)``: chance a fresh sample lands on level ``j + 1`` or higher."""
    marginals = model.marginals if isinstance(model, ProbabilisticModel) else model
    return tail_geq(PoissonBinomial(marginals), j)


def classify_case(k: int, l: int, j: int, mu: int, n: int, c: float) -> Case:
    if k < 0 or l < 0 or k + l > n or not 1 <= j <= n:
        raise InvalidInputError(f"inconsistent counts k={k}, l={l}, j={j}, n={n}")
    if k >= mu:
        return Case.CASE1
    # j >= n(1 - 1/mu) + 1, kept in integers
    if mu * (j - 1) >= n * (mu - 1):
        return Case.CASE2
    return Case.CASE3


def z_lower_bound(n: int, j: int, c: float) -> float:
    """``min(1/(14e), c/(2e)) * (n - j + 1) / n``."""
    if not 1 <= j <= n:
        raise InvalidInputError(f"level {j} outside 1..{n}")
    if not 0 < c < 1:
        raise InvalidParameterError(f"c must lie in (0, 1), got {c}")
    return min(1.0 / (14.0 * E), c / (2.0 * E)) * (n - j + 1) / n


def g3_min_lambda(gamma0: float, delta: float, m: int, z_star: float) -> float:
    if not (gamma0 > 0 and 0 < delta <= 1 and m > 0 and z_star > 0):
        raise InvalidParameterError("g3_min_lambda needs positive arguments and delta <= 1")
    return 4.0 / (gamma0 * delta**2) * math.log(128.0 * m / (z_star * delta**2))


def expected_time_bound(z: Sequence[float], delta: float, lam: float) -> float:
    """``(8/delta^2) * sum_j [lam ln(6 delta lam / (4 + z_j delta lam)) + 1/z_j]``."""
    z = np.asarray(z, dtype=float)
    if z.size == 0 or np.any(z <= 0) or np.any(z > 1):
        raise InvalidParameterError("every z_j must lie in (0, 1]")
    if not 0 < delta <= 1 or lam < 1:
        raise InvalidParameterError("need delta in (0, 1] and lambda >= 1")
    terms = lam * np.log(6.0 * delta * lam / (4.0 + z * delta * lam)) + 1.0 / z
    return 8.0 / delta**2 * math.fsum(terms)


def all_ones_probability(n: int, count: int) -> float:
    """``Pr(Y_{k+1,k+l} = l)`` for ``count`` upper-border positions at ``1 - 1/n``, via the exact PMF."""
    if count == 0:
        return 1.0
    return float(pmf(PoissonBinomial(np.full(count, 1.0 - 1.0 / n)))[count])


def check_upper_block(n: int) -> InequalityReport:
    """``(1 - 1/n)^l >= 1/e`` for every ``l`` in ``0..n-1``; the smallest value is the witness."""
    values = [all_ones_probability(n, l) for l in range(n)]
    worst = int(np.argmin(values))
    return InequalityReport(
        name="upper_block",
        statistic=values[worst],
        bound=1.0 / E,
        satisfied=values[worst] >= 1.0 / E,
        direction=">=",
        witness=f"l={worst}",
    )


def _groups(sums: np.ndarray, mu: int, margin: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    marg = marginals_from_sums(sums, mu, margin)
    upper = sums > mu - margin
    lower = sums < margin
    interior = ~(upper | lower)
    return marg[interior], marg[upper], marg[lower]


def _tail(probs: np.ndarray, y: int) -> float:
    """``Pr(sum >= y)`` allowing empty groups and out-of-range thresholds."""
    if y <= 0:
        return 1.0
    if y > probs.size:
        return 0.0
    return tail_geq(PoissonBinomial(probs), y)


def _validate_sums(column_sums, mu: int) -> np.ndarray:
    sums = np.asarray(column_sums)
    if sums.ndim != 1 or sums.size < 1:
        raise InvalidInputError("column sums must be a non-empty 1-D sequence")
    if not np.all(np.equal(np.mod(sums, 1), 0)):
        raise InvalidInputError("column sums must be integers")
    sums = sums.astype(np.int64)
    if np.any(sums < 0) or np.any(sums > mu):
        raise InvalidInputError(f"column sums must lie in [0, {mu}]")
    return sums


def check_G2_arithmetic(
    column_sums: Sequence[int],
    mu: int,
    lam: int,
    gamma: float,
    j: int,
    c: float = 0.5,
    margin: float | None = None,
) -> InequalityReport:
    """Check the multiplicative-growth step for a population with ``gamma * lam`` upgraded parents.

    Sub-checks in ``details``: the column-sum inequality, the lower bound on
    ``E[Z]`` for ``Z`` the one-bits outside the upper-border block, the exact
    all-ones probability of that block, and the Feige step
    ``Pr(Z >= j - l) >= gamma / (13 gamma0)``. The headline inequality is
    ``Pr(Y_{1,n} >= j) >= gamma / (1 - c)``.
    """
    sums = _validate_sums(column_sums, mu)
    n = sums.size
    if margin is None:
        margin = mu / n
    if not 0 < gamma <= mu / lam:
        raise PreconditionError(f"gamma must lie in (0, mu/lambda], got {gamma}")
    if not 1 <= j <= n - 1:
        raise PreconditionError(f"level {j} outside 1..{n - 1}")
    gamma0 = mu / lam
    total = int(sums.sum())
    required = gamma * lam + mu * (j - 1)
    if total < required - 1e-9:
        raise PreconditionError(f"sum of X_i is {total}, below gamma*lambda + mu(j-1) = {required}")

    interior, upper, lower = _groups(sums, mu, margin)
    k, l = interior.size, upper.size
    z_probs = np.concatenate([interior, lower])
    z_mean = math.fsum(z_probs)
    ez_bound = j - l - 1 + gamma / gamma0
    block = all_ones_probability(n, l)
    z_tail = _tail(z_probs, j - l)
    feige_bound = gamma / (13.0 * gamma0)
    exact = upgrade_probability(marginals_from_sums(sums, mu, margin), j)
    growth = gamma / (1.0 - c)
    sub = {
        "sum_X": (total, required, total >= required - 1e-9),
        "mean_Z": (z_mean, ez_bound, z_mean >= ez_bound - 1e-9),
        "upper_block": (block, 1.0 / E, block >= 1.0 / E),
        "feige_step": (z_tail, feige_bound, z_tail >= feige_bound - PROB_TOL),
        "growth": (exact, growth, exact >= growth - PROB_TOL),
    }
    failed = [name for name, (_, _, ok) in sub.items() if not ok]
    return InequalityReport(
        name="G2",
        statistic=exact,
        bound=growth,
        satisfied=not failed,
        direction=">=",
        witness="; ".join(failed) or None,
        details={"j": j, "k": k, "l": l, "gamma": gamma, "checks": sub},
    )


def _case_bound(
    case: Case, n: int, mu: int, j: int, k: int, l: int, interior: np.ndarray, eta: float
) -> tuple[float | None, dict]:
    """Closed-form lower bound on ``Pr(Y_{1,n} >= j)`` for the case, plus sub-check values."""
    notes: dict = {}
    if case is Case.CASE1:
        target = j - l - 1
        pb = PoissonBinomial(interior)
        _, var = mean_variance(pb)
        sigma = math.sqrt(var)
        table = pmf(pb)
        point = float(table[target]) if 0 <= target < table.size else 0.0
        at_mean = _tail(interior, target)
        notes["sigma_k"] = sigma
        notes["anticoncentration"] = (point, eta / sigma, point <= eta / sigma + 1e-9)
        notes["median"] = (at_mean, 0.5, at_mean >= 0.5 - PROB_TOL)
        above = _tail(interior, target + 1)
        notes["interior_gain"] = (above, 0.5 - eta / sigma, above >= 0.5 - eta / sigma - PROB_TOL)
        return (0.5 - eta / sigma) / E, notes
    if case is Case.CASE2:
        # the 1/(14 e mu) argument needs an interior position and is only claimed for mu >= 14
        if mu >= 14 and k >= 1:
            rest = _tail(interior[1:], j - l - 1)
            notes["rest_tail"] = (rest, 1.0 / 14.0, rest >= 1.0 / 14.0 - PROB_TOL)
            return 1.0 / (14.0 * E * mu), notes
        notes["unasserted"] = "mu < 14 or no interior position"
        return None, notes
    return (n - k - l) / (2.0 * E * n), notes


def check_G1_cases(
    column_sums: Sequence[int],
    params: UmdaParams,
    c: float,
    j: int | None = None,
    eta: float | None = None,
) -> InequalityReport:
    """Check the upgrade probability when all ``mu`` selected parents sit on level ``j``.

    ``j`` is recovered from ``sum X_i = mu (j - 1)`` when not given. The exact
    probability must dominate both the case bound (when the case has one) and
    ``z_lower_bound(n, j, c)``.
    """
    mu = params.mu
    sums = _validate_sums(column_sums, mu)
    n = sums.size
    margin = mu / n
    total = int(sums.sum())
    if total % mu:
        raise PreconditionError(f"sum of X_i = {total} is not a multiple of mu = {mu}")
    derived = total // mu + 1
    if j is not None and j != derived:
        raise PreconditionError(f"sum of X_i = {total} gives level {derived}, not {j}")
    j = derived
    if not 1 <= j <= n:
        raise PreconditionError(f"level {j} outside 1..{n}")
    if eta is None:
        eta = compute_eta()

    k, l = classify_positions(sums, mu, margin)
    case = classify_case(k, l, j, mu, n, c)
    interior, _, _ = _groups(sums, mu, margin)
    exact = upgrade_probability(marginals_from_sums(sums, mu, margin), j)
    case_bound, notes = _case_bound(case, n, mu, j, k, l, interior, eta)
    z_bound = z_lower_bound(n, j, c)
    if case is Case.CASE3 and mu <= math.sqrt(n * (1 - c)):
        notes["case3_k_small"] = k < (1 - c) * (n - j + 1)

    checks = {"z_bound": exact >= z_bound - PROB_TOL}
    if case_bound is not None:
        checks["case_bound"] = exact >= case_bound - PROB_TOL
    for name, value in notes.items():
        if isinstance(value, tuple):
            checks[name] = value[2]
    failed = [name for name, ok in checks.items() if not ok]
    return InequalityReport(
        name="G1",
        statistic=exact,
        bound=max(z_bound, case_bound if case_bound is not None else 0.0),
        satisfied=not failed,
        direction=">=",
        witness="; ".join(failed) or None,
        details={
            "case": case.value,
            "j": j,
            "k": k,
            "l": l,
            "exact_prob": exact,
            "case_bound": case_bound,
            "z_bound": z_bound,
            "notes": notes,
        },
    )


def hypothesis_population(
    n: int, mu: int, j: int, upgraded: int, rng: np.random.Generator
) -> np.ndarray:
    """``mu`` parents: ``upgraded`` of them with ``j`` one-bits, the rest with ``j - 1``.

    Every parent shares an all-ones block of random width; the remaining ones
    land uniformly inside a pool of random size, which is what spreads the
    column sums over interior and border values. Columns are shuffled last.
    """
    if not 0 <= upgraded <= mu or not 1 <= j <= n:
        raise InvalidInputError("cannot build the requested population")
    # the shared block may not exceed the smallest row, the pool must fit the largest
    shared = int(rng.integers(0, (j if upgraded == mu else j - 1) + 1))
    widest = (j if upgraded else j - 1) - shared
    pool = int(rng.integers(max(widest, 1), n - shared + 1)) if n > shared else 0
    rows = np.zeros((mu, n), dtype=np.uint8)
    rows[:, :shared] = 1
    for r in range(mu):
        need = (j if r < upgraded else j - 1) - shared
        if need > 0:
            rows[r, shared + rng.choice(pool, size=need, replace=False)] = 1
    return rows[:, rng.permutation(n)]


def _regime_mus(n: int, c: float, a: float) -> list[int]:
    lo = max(1, math.ceil(a * math.log(n)))
    hi = math.floor(math.sqrt(n * (1 - c)))
    return list(range(lo, hi + 1))


def level_battery(
    n: int,
    instances: int,
    rng: np.random.Generator,
    c: float = 0.5,
    mu: int | None = None,
    lam: int | None = None,
    a: float = 1.0,
    kind: str = "both",
) -> list[dict]:
    """Random G1/G2 hypothesis instances, each checked; one JSON-ready record per instance.

    With ``mu``/``lam`` unset, ``mu`` is drawn from the regime
    ``a ln n <= mu <= sqrt(n(1-c))`` and ``lam = ceil(13 e mu / (1-c))``.
    """
    kinds = {"both": ("G1", "G2"), "G1": ("G1",), "G2": ("G2",)}[kind]
    eta = compute_eta()
    choices = [mu] if mu is not None else _regime_mus(n, c, a)
    if not choices:
        raise InvalidParameterError(f"no admissible mu for n={n}, c={c}, a={a}")
    records = []
    for idx in range(instances):
        which = kinds[idx % len(kinds)]
        m_ = int(rng.choice(choices))
        l_ = lam if lam is not None else math.ceil(13 * E * m_ / (1 - c))
        params = UmdaParams(n=n, lam=l_, mu=m_, margin=m_ / n)
        # a third of the draws target the strip close to the optimum
        near = rng.random() < 1 / 3
        j_lo = max(1, math.ceil(n * (1 - 1 / m_)) + 1) if near else 1
        if which == "G1":
            j = int(rng.integers(j_lo, n + 1))
            pop = hypothesis_population(n, m_, j, 0, rng)
            rep = check_G1_cases(pop.sum(axis=0), params, c, j=j, eta=eta)
            d = rep.details
            rec = {
                "kind": "G1",
                "case": d["case"],
                "j": j,
                "k": d["k"],
                "l": d["l"],
                "exact_prob": d["exact_prob"],
                "case_bound": d["case_bound"],
                "z_bound": d["z_bound"],
            }
        else:
            j = int(rng.integers(min(j_lo, n - 1), n))
            upgraded = int(rng.integers(1, m_ + 1))
            gamma = upgraded / l_
            pop = hypothesis_population(n, m_, j, upgraded, rng)
            rep = check_G2_arithmetic(pop.sum(axis=0), m_, l_, gamma, j, c=c)
            z_bound = z_lower_bound(n, j, c)
            z_ok = rep.statistic >= z_bound - PROB_TOL
            rep = InequalityReport(**{**rep.__dict__, "satisfied": rep.satisfied and z_ok})
            d = rep.details
            rec = {
                "kind": "G2",
                "case": "G2",
                "j": j,
                "k": d["k"],
                "l": d["l"],
                "exact_prob": rep.statistic,
                "case_bound": rep.bound,
                "z_bound": z_bound,
            }
        rec.update({"n": n, "mu": m_, "lambda": l_, "satisfied": bool(rep.satisfied), "failed": rep.witness})
        records.append(rec)
    return records
