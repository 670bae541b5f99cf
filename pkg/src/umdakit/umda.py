"""The UMDA loop with truncation selection and the two runtime counters.

Generations are counted from 1. ``samples_T`` is ``lam * generations`` at the
first generation whose population contains an optimum, while
``first_hit_evals`` is the 1-based evaluation index of the first optimal
individual in sampling order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from umdakit.errors import InvalidParameterError
from umdakit.fitness import FitnessFunction
from umdakit.model import (
    SCHEMA_VERSION,
    ProbabilisticModel,
    make_rng,
    marginals_from_sums,
    new_uniform,
    sample_population,
)
from umdakit.pbdist import InequalityReport


@dataclass(frozen=True)
class UmdaParams:
    n: int
    lam: int
    mu: int
    margin: float
    max_generations: int = 10**5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.mu <= self.lam:
            raise InvalidParameterError(f"need 1 <= mu <= lambda, got mu={self.mu}, lambda={self.lam}")
        if not 0 < self.margin < self.mu:
            raise InvalidParameterError(f"need 0 < margin < mu, got {self.margin}")
        if self.max_generations < 1:
            raise InvalidParameterError("max_generations must be >= 1")


@dataclass(frozen=True)
class Population:
    individuals: np.ndarray
    fitnesses: np.ndarray


@dataclass(frozen=True)
class RunRecord:
    hit_optimum: bool
    generations: int
    samples_T: int
    first_hit_evals: int | None
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def check_theorem4_regime(params: UmdaParams, a: float, c: float) -> InequalityReport:
    """Check ``a ln n <= mu <= sqrt(n(1-c))``, ``lam >= 13 e mu / (1-c)`` and ``margin = mu/n``.

    ``statistic`` is the number of failed clauses and ``witness`` names them.
    """
    if not 0 < c < 1 or not a > 0:
        raise InvalidParameterError(f"need a > 0 and 0 < c < 1, got a={a}, c={c}")
    n, mu, lam = params.n, params.mu, params.lam
    clauses = {
        "mu >= a ln n": mu >= a * math.log(n),
        "mu <= sqrt(n(1-c))": mu <= math.sqrt(n * (1 - c)),
        "lambda >= 13e mu/(1-c)": lam >= 13 * math.e * mu / (1 - c),
        "margin = mu/n": abs(params.margin - mu / n) <= 1e-12,
    }
    failed = [name for name, ok in clauses.items() if not ok]
    return InequalityReport(
        name="theorem4_regime",
        statistic=float(len(failed)),
        bound=0.0,
        satisfied=not failed,
        direction="<=",
        witness="; ".join(failed) or None,
        details={"clauses": clauses, "a": a, "c": c},
    )


def select_truncation(pop: Population, mu: int, rng: np.random.Generator) -> np.ndarray:
    """The ``mu`` fittest rows; ties at the cutoff are broken uniformly at random."""
    lam = len(pop.fitnesses)
    if not 1 <= mu <= lam:
        raise InvalidParameterError(f"cannot select mu={mu} from {lam} individuals")
    order = rng.permutation(lam)
    ranked = order[np.argsort(-np.asarray(pop.fitnesses)[order], kind="stable")]
    return pop.individuals[ranked[:mu]]


def run(
    params: UmdaParams,
    f: FitnessFunction,
    record_trajectory: bool = False,
) -> RunRecord | tuple[RunRecord, list[dict]]:
    """Run UMDA until an optimum is sampled or ``max_generations`` is reached.

    With ``record_trajectory`` the return value is ``(record, rows)`` where each
    row holds the generation index, best and mean fitness of that generation's
    population and the model it was sampled from.
    """
    rng = make_rng(params.seed)
    model = new_uniform(params.n, params.mu, params.margin)
    trajectory: list[dict] = []
    for generation in range(1, params.max_generations + 1):
        individuals = sample_population(model, params.lam, rng)
        fitnesses = np.asarray(f(individuals))
        if record_trajectory:
            trajectory.append(
                {
                    "generation": generation,
                    "best_fitness": fitnesses.max().item(),
                    "mean_fitness": float(fitnesses.mean()),
                    "marginals": model.marginals,
                }
            )
        hits = np.flatnonzero(fitnesses >= f.optimum)
        if hits.size:
            record = RunRecord(
                hit_optimum=True,
                generations=generation,
                samples_T=params.lam * generation,
                first_hit_evals=params.lam * (generation - 1) + int(hits[0]) + 1,
                seed=params.seed,
            )
            break
        selected = select_truncation(Population(individuals, fitnesses), params.mu, rng)
        model = ProbabilisticModel(
            marginals_from_sums(selected.sum(axis=0), params.mu, params.margin),
            mu=params.mu,
            margin=params.margin,
        )
    else:
        record = RunRecord(
            hit_optimum=False,
            generations=params.max_generations,
            samples_T=params.lam * params.max_generations,
            first_hit_evals=None,
            seed=params.seed,
        )
    return (record, trajectory) if record_trajectory else record


def write_trajectory(path: str | Path, rows: list[dict]) -> None:
    """CSV ``generation,best_fitness,mean_fitness,p_1..p_n``."""
    if not rows:
        return
    n = len(rows[0]["marginals"])
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "best_fitness", "mean_fitness", *(f"p_{i}" for i in range(1, n + 1))])
        for row in rows:
            writer.writerow(
                [
                    row["generation"],
                    row["best_fitness"],
                    repr(row["mean_fitness"]),
                    *(repr(float(v)) for v in row["marginals"]),
                ]
            )
