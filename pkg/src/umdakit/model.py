"""Univariate product model with bordered frequency updates.

Bit strings are plain ``numpy`` ``uint8`` arrays; a population is a 2-D array
with one individual per row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from umdakit.errors import InvalidInputError, InvalidParameterError

SCHEMA_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by a 64-bit seed.

    Philox4x64 gives the same stream on every platform for the same seed, and
    ``numpy`` guarantees stream stability for it across versions.
    """
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _borders(mu: int, margin: float) -> tuple[float, float]:
    if mu < 1:
        raise InvalidParameterError(f"mu must be >= 1, got {mu}")
    if not 0 < margin < mu:
        raise InvalidParameterError(f"margin must satisfy 0 < margin < mu, got {margin} with mu={mu}")
    lower, upper = margin / mu, 1.0 - margin / mu
    if not lower < upper:
        raise InvalidParameterError(f"margin {margin} leaves an empty interval for mu={mu}")
    return lower, upper


@dataclass(frozen=True)
class ProbabilisticModel:
    marginals: np.ndarray
    mu: int
    margin: float

    def __post_init__(self):
        arr = np.array(self.marginals, dtype=float).ravel()
        if arr.size < 1:
            raise InvalidInputError("a model needs at least one position")
        lower, upper = _borders(self.mu, self.margin)
        if np.any(arr < lower - 1e-12) or np.any(arr > upper + 1e-12):
            raise InvalidInputError(f"marginals must lie in [{lower}, {upper}]")
        arr.setflags(write=False)
        object.__setattr__(self, "marginals", arr)

    @property
    def n(self) -> int:
        return int(self.marginals.size)

    @property
    def lower_border(self) -> float:
        return self.margin / self.mu

    @property
    def upper_border(self) -> float:
        return 1.0 - self.margin / self.mu


def new_uniform(n: int, mu: int, margin: float) -> ProbabilisticModel:
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    _borders(mu, margin)
    return ProbabilisticModel(np.full(n, 0.5), mu=mu, margin=margin)


def sample(model: ProbabilisticModel, rng: np.random.Generator) -> np.ndarray:
    """One bit string from the product distribution."""
    return (rng.random(model.n) < model.marginals).astype(np.uint8)


def sample_population(model: ProbabilisticModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent bit strings, one per row, drawn row by row."""
    return (rng.random((size, model.n)) < model.marginals).astype(np.uint8)


def column_sums(selected: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    try:
        arr = np.asarray(selected)
    except ValueError as exc:
        raise InvalidInputError("selected strings have unequal lengths") from exc
    if arr.dtype == object or arr.ndim != 2:
        raise InvalidInputError("selected strings must form a non-empty rectangular array")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError("need at least one selected string of length >= 1")
    return arr.astype(np.int64).sum(axis=0)


def marginals_from_sums(sums: np.ndarray, mu: int, margin: float) -> np.ndarray:
    """Apply the bordered update rule to column sums ``X_i`` of ``mu`` strings."""
    lower, upper = _borders(mu, margin)
    sums = np.asarray(sums, dtype=float)
    out = sums / mu
    out = np.where(sums < margin, lower, out)
    out = np.where(sums > mu - margin, upper, out)
    return out


def update(selected: Sequence[Sequence[int]] | np.ndarray, margin: float) -> ProbabilisticModel:
    """Next model from the ``mu`` selected strings: frequencies clamped to the borders."""
    sums = column_sums(selected)
    mu = int(np.asarray(selected).shape[0])
    return ProbabilisticModel(marginals_from_sums(sums, mu, margin), mu=mu, margin=margin)


def classify_positions(sums: Sequence[int], mu: int, margin: float) -> tuple[int, int]:
    """Count interior positions ``k`` and upper-border positions ``l`` after an update.

    Interior means ``margin <= X_i <= mu - margin``; upper border means
    ``X_i > mu - margin``. The rest sit at the lower border.
    """
    arr = np.asarray(sums)
    if arr.ndim != 1 or np.any(arr < 0) or np.any(arr > mu):
        raise InvalidInputError(f"column sums must lie in [0, {mu}]")
    upper = int(np.count_nonzero(arr > mu - margin))
    interior = int(np.count_nonzero((arr >= margin) & (arr <= mu - margin)))
    return interior, upper


def write_snapshots(path: str | Path, models: Iterable[ProbabilisticModel]) -> None:
    """CSV with one row per generation: ``t,p_1..p_n`` (``t`` counts from 0)."""
    rows = list(models)
    if not rows:
        raise InvalidInputError("no models to write")
    n = rows[0].n
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", *(f"p_{i}" for i in range(1, n + 1))])
        for t, m in enumerate(rows):
            writer.writerow([t, *(repr(float(v)) for v in m.marginals)])


def read_snapshots(path: str | Path) -> np.ndarray:
    """Marginal trajectory as a ``(generations, n)`` array."""
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if header[0] != "t":
            raise InvalidInputError(f"unexpected snapshot header {header[:2]}")
        return np.array([[float(v) for v in row[1:]] for row in reader])
