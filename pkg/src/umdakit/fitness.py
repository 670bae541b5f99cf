"""Pseudo-Boolean benchmark functions.

Each evaluator accepts a single bit string or a 2-D population (one row per
individual) and returns integer fitness values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from umdakit.errors import InvalidParameterError

BINVAL_MAX_N = 62


def _rows(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=np.int64))


def _unwrap(values: np.ndarray, x) -> np.ndarray | int:
    return int(values[0]) if np.asarray(x).ndim == 1 else values


def onemax(x):
    return _unwrap(_rows(x).sum(axis=1), x)


def leadingones(x):
    """Length of the longest all-ones prefix."""
    return _unwrap(np.cumprod(_rows(x), axis=1).sum(axis=1), x)


def binval(x):
    rows = _rows(x)
    n = rows.shape[1]
    if n > BINVAL_MAX_N:
        raise InvalidParameterError(f"binval is exact only for n <= {BINVAL_MAX_N}, got {n}")
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return _unwrap(rows @ weights, x)


@dataclass(frozen=True)
class FitnessFunction:
    name: str
    n: int
    evaluator: Callable
    optimum: float

    def __call__(self, x):
        return self.evaluator(x)


_OPTIMA: dict[str, tuple[Callable, Callable[[int], float]]] = {
    "onemax": (onemax, lambda n: n),
    "leadingones": (leadingones, lambda n: n),
    "binval": (binval, lambda n: 2**n - 1),
}

FITNESS_NAMES = tuple(_OPTIMA)


def get_fitness(name: str, n: int) -> FitnessFunction:
    try:
        fn, opt = _OPTIMA[name.lower()]
    except KeyError:
        raise InvalidParameterError(f"unknown fitness {name!r}; choose from {', '.join(FITNESS_NAMES)}") from None
    if name.lower() == "binval" and n > BINVAL_MAX_N:
        raise InvalidParameterError(f"binval is exact only for n <= {BINVAL_MAX_N}, got {n}")
    return FitnessFunction(name=name.lower(), n=n, evaluator=fn, optimum=opt(n))
