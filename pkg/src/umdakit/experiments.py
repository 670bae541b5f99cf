"""Parameter sweeps, bootstrap confidence intervals and growth-model fits.

A sweep runs ``replicates`` independent UMDA runs for every problem size. Run
seeds depend only on ``(master_seed, n, replicate)``, so results do not depend
on how runs are scheduled across worker processes.
"""

from __future__ import annotations

import ast
import csv
import json
import math
import operator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from umdakit.errors import InvalidInputError, InvalidParameterError
from umdakit.fitness import FITNESS_NAMES, get_fitness
from umdakit.model import SCHEMA_VERSION, make_rng
from umdakit.umda import RunRecord, UmdaParams, run

RUNS_HEADER = ["n", "replicate", "seed", "hit", "generations", "samples_T", "first_hit_evals"]
SUMMARY_HEADER = ["n", "mean", "ci_lo", "ci_hi", "success_rate"]
BOOTSTRAP_SAMPLES = 100
CONFIDENCE = 0.95
_BOOT_STREAM = 0xB007

# --- parameter rules -------------------------------------------------------

_FUNCS: dict[str, Callable] = {
    "sqrt": math.sqrt,
    "log": math.log,
    "ln": math.log,
    "log2": math.log2,
    "log10": math.log10,
    "ceil": math.ceil,
    "floor": math.floor,
    "min": min,
    "max": max,
}
_CONSTS = {"e": math.e, "pi": math.pi}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def eval_rule(expr: str, **names: float) -> float:
    """Evaluate an arithmetic rule such as ``"sqrt(n)"`` or ``"mu/n"``.

    Only numbers, ``+ - * / **``, the names passed in, ``e``, ``pi`` and a few
    ``math`` functions are accepted.
    """
    env = {**_CONSTS, **names}

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in env:
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if node.keywords:
                raise InvalidParameterError(f"keyword arguments not allowed in rule {expr!r}")
            return _FUNCS[node.func.id](*(walk(a) for a in node.args))
        raise InvalidParameterError(f"unsupported element in rule {expr!r}: {ast.dump(node)}")

    try:
        tree = ast.parse(str(expr), mode="eval")
    except SyntaxError as exc:
        raise InvalidParameterError(f"cannot parse rule {expr!r}") from exc
    return float(walk(tree))


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...]
    replicates: int = 100
    lambda_rule: str = "sqrt(n)"
    mu_rule: str = "log(n)"
    margin: str = "0.5"
    fitness: str = "onemax"
    master_seed: int = 0
    max_generations: int = 10**5

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(v) for v in self.n_values))
        if self.replicates < 1:
            raise InvalidParameterError("replicates must be >= 1")
        if self.fitness not in FITNESS_NAMES:
            raise InvalidParameterError(f"unknown fitness {self.fitness!r}")
        for n in self.n_values:
            self.params_for(n, 0)

    def params_for(self, n: int, replicate: int) -> UmdaParams:
        """Run parameters for size ``n``; non-integer population sizes round up."""
        mu = math.ceil(eval_rule(self.mu_rule, n=n) - 1e-9)
        lam = math.ceil(eval_rule(self.lambda_rule, n=n, mu=mu) - 1e-9)
        margin = eval_rule(self.margin, n=n, mu=mu, lam=lam)
        return UmdaParams(
            n=n,
            lam=lam,
            mu=mu,
            margin=margin,
            max_generations=self.max_generations,
            seed=derive_seed(self.master_seed, n, replicate),
        )

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kw: dict = dict(values)
        if "n_values" in kw and isinstance(kw["n_values"], str):
            kw["n_values"] = tuple(int(v) for v in kw["n_values"].replace(",", " ").split())
        for key in ("replicates", "master_seed", "max_generations"):
            if key in kw:
                kw[key] = int(float(kw[key]))
        return cls(**kw)


def derive_seed(master_seed: int, n: int, replicate: int) -> int:
    """64-bit run seed from ``numpy.random.SeedSequence([master_seed, n, replicate])``."""
    ss = np.random.SeedSequence([int(master_seed), int(n), int(replicate)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepRow:
    n: int
    replicate: int
    record: RunRecord


def _run_one(args: tuple[UmdaParams, str]) -> RunRecord:
    params, fitness = args
    return run(params, get_fitness(fitness, params.n))


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[SweepRow]:
    """All ``replicates x len(n_values)`` runs, ordered by ``n`` then replicate."""
    keys = [(n, r) for n in config.n_values for r in range(config.replicates)]
    tasks = [(config.params_for(n, r), config.fitness) for n, r in keys]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_run_one(t) for t in tasks]
    return [SweepRow(n, r, rec) for (n, r), rec in zip(keys, records)]


# --- statistics --------------------------------------------------------------


def bootstrap_ci(
    samples: Sequence[float], B: int = BOOTSTRAP_SAMPLES, level: float = CONFIDENCE, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean (linear interpolation between order statistics)."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise InvalidInputError("bootstrap needs at least one sample")
    if not 0 < level < 1 or B < 1:
        raise InvalidParameterError("need 0 < level < 1 and B >= 1")
    rng = make_rng(seed)
    idx = rng.integers(0, data.size, size=(B, data.size))
    means = data[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [100 * alpha, 100 * (1 - alpha)], method="linear")
    return float(lo), float(hi)


@dataclass(frozen=True)
class SummaryRow:
    n: int
    mean: float
    ci_lo: float
    ci_hi: float
    success_rate: float


@dataclass(frozen=True)
class ExperimentSummary:
    rows: tuple[SummaryRow, ...]

    @property
    def n_values(self) -> np.ndarray:
        return np.array([r.n for r in self.rows], dtype=float)

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.rows], dtype=float)


def summarize(
    rows: Iterable[SweepRow],
    master_seed: int = 0,
    B: int = BOOTSTRAP_SAMPLES,
    level: float = CONFIDENCE,
    counter: str = "first_hit_evals",
) -> ExperimentSummary:
    """Mean runtime per ``n`` over successful runs, with bootstrap CI and success rate."""
    by_n: dict[int, list[RunRecord]] = {}
    for row in rows:
        by_n.setdefault(row.n, []).append(row.record)
    out = []
    for n in sorted(by_n):
        recs = by_n[n]
        values = [getattr(r, counter) for r in recs if r.hit_optimum]
        rate = len(values) / len(recs)
        if values:
            lo, hi = bootstrap_ci(values, B=B, level=level, seed=derive_seed(master_seed, n, _BOOT_STREAM))
            mean = float(np.mean(values))
        else:
            mean = lo = hi = math.nan
        out.append(SummaryRow(n=n, mean=mean, ci_lo=lo, ci_hi=hi, success_rate=rate))
    return ExperimentSummary(tuple(out))


@dataclass(frozen=True)
class GrowthModel:
    name: str
    g: Callable[[np.ndarray], np.ndarray]


def growth_models(log_base: float = math.e) -> tuple[GrowthModel, ...]:
    return (
        GrowthModel("n log n", lambda n: n * np.log(n) / math.log(log_base)),
        GrowthModel("n^{3/2}", lambda n: n**1.5),
        GrowthModel("n^2", lambda n: n**2.0),
    )


@dataclass(frozen=True)
class FitResult:
    model: str
    coefficient: float
    correlation: float
    fitted: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "coefficient": self.coefficient,
            "correlation": self.correlation,
        }


def fit_model(n_values: Sequence[float], means: Sequence[float], model: GrowthModel) -> FitResult:
    """Least-squares ``y ~ c * g(n)`` with Pearson correlation between data and fit."""
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(means, dtype=float)
    if n.size != y.size or n.size < 2:
        raise InvalidInputError("need at least two (n, mean) pairs of equal length")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("means contain non-finite values")
    g = np.asarray(model.g(n), dtype=float)
    if np.any(g <= 0):
        raise InvalidInputError(f"growth model {model.name} is not positive on the data")
    coef = float(np.dot(y, g) / np.dot(g, g))
    fitted = coef * g
    if np.ptp(g) == 0 or np.ptp(y) == 0:
        raise InvalidInputError("correlation undefined for constant data or constant model")
    corr = float(np.corrcoef(y, fitted)[0, 1])
    return FitResult(model.name, coef, corr, tuple(fitted))


def compare_models(
    summary: ExperimentSummary, log_base: float = math.e, models: Sequence[GrowthModel] | None = None
) -> list[FitResult]:
    """Fit every growth model and rank by correlation, best first."""
    if len(summary.rows) < 3:
        raise InvalidInputError("model comparison needs at least three problem sizes")
    models = models or growth_models(log_base)
    fits = [fit_model(summary.n_values, summary.means, m) for m in models]
    return sorted(fits, key=lambda f: -f.correlation)


def format_fit_table(fits: Sequence[FitResult]) -> str:
    lines = [f"{'Best-fit function':<24}Correlation coefficient"]
    for f in fits:
        lines.append(f"{f'{f.coefficient:.4g} * {f.model}':<24}{f.correlation:.4f}")
    return "\n".join(lines)


# --- files -------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(float(v))


def write_runs_csv(path: str | Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for row in rows:
            r = row.record
            w.writerow(
                [
                    row.n,
                    row.replicate,
                    r.seed,
                    int(r.hit_optimum),
                    r.generations,
                    r.samples_T,
                    "" if r.first_hit_evals is None else r.first_hit_evals,
                ]
            )


def read_runs_csv(path: str | Path) -> list[SweepRow]:
    rows = []
    for rec in _read_csv(path, RUNS_HEADER):
        hit = rec["hit"] == "1"
        rows.append(
            SweepRow(
                int(rec["n"]),
                int(rec["replicate"]),
                RunRecord(
                    hit_optimum=hit,
                    generations=int(rec["generations"]),
                    samples_T=int(rec["samples_T"]),
                    first_hit_evals=int(rec["first_hit_evals"]) if hit else None,
                    seed=int(rec["seed"]),
                ),
            )
        )
    return rows


def write_summary_csv(path: str | Path, summary: ExperimentSummary) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in summary.rows:
            w.writerow([r.n, _fmt(r.mean), _fmt(r.ci_lo), _fmt(r.ci_hi), _fmt(r.success_rate)])


def read_summary_csv(path: str | Path) -> ExperimentSummary:
    return ExperimentSummary(
        tuple(
            SummaryRow(
                n=int(rec["n"]),
                mean=float(rec["mean"]),
                ci_lo=float(rec["ci_lo"]),
                ci_hi=float(rec["ci_hi"]),
                success_rate=float(rec["success_rate"]),
            )
            for rec in _read_csv(path, SUMMARY_HEADER)
        )
    )


def _read_csv(path: str | Path, header: list[str]) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if reader.fieldnames != header:
            raise InvalidInputError(f"{path}: expected header {','.join(header)}, got {reader.fieldnames}")
        return list(reader)


def write_fits_json(path: str | Path, fits: Sequence[FitResult]) -> None:
    with open(path, "w") as fh:
        json.dump([f.to_dict() for f in fits], fh, indent=2)
        fh.write("\n")


def plot_summary_svg(
    path: str | Path, summary: ExperimentSummary, fits: Sequence[FitResult], log_base: float = math.e
) -> None:
    """Mean runtime with CI error bars and the fitted curves overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "umdakit"
    n = summary.n_values
    y = summary.means
    lo = np.array([r.ci_lo for r in summary.rows])
    hi = np.array([r.ci_hi for r in summary.rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(n, y, yerr=[y - lo, hi - y], fmt="o", ms=3, capsize=3, color="black", label="mean runtime")
    grid = np.linspace(n.min(), n.max(), 200)
    by_name = {m.name: m for m in growth_models(log_base)}
    for f in fits:
        if f.model in by_name:
            ax.plot(grid, f.coefficient * by_name[f.model].g(grid), label=f"{f.coefficient:.3g} {f.model}")
    ax.set_xlabel("n")
    ax.set_ylabel("evaluations")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
