import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from umdakit.errors import InvalidInputError, InvalidParameterError
from umdakit.experiments import (
    ExperimentSummary,
    GrowthModel,
    SummaryRow,
    SweepConfig,
    SweepRow,
    bootstrap_ci,
    compare_models,
    derive_seed,
    eval_rule,
    fit_model,
    format_fit_table,
    growth_models,
    plot_summary_svg,
    read_runs_csv,
    read_summary_csv,
    run_sweep,
    summarize,
    write_fits_json,
    write_runs_csv,
    write_summary_csv,
)
from umdakit.umda import RunRecord


def small_config(**kw):
    base = dict(n_values=(10, 20), replicates=4, margin="mu/n", max_generations=2000, master_seed=3)
    base.update(kw)
    return SweepConfig(**base)


def test_eval_rule():
    assert eval_rule("sqrt(n)", n=100) == 10
    assert eval_rule("log(n)", n=math.e**2) == pytest.approx(2)
    assert eval_rule("13*e*mu/(1-0.5)", mu=2) == pytest.approx(52 * math.e)
    assert eval_rule("max(2, -n + 5)", n=1) == 4
    for bad in ("__import__('os')", "n.real", "open", "x", "sqrt(n=4)", "1 +"):
        with pytest.raises(InvalidParameterError):
            eval_rule(bad, n=4)


def test_params_for_rounds_up():
    cfg = SweepConfig(n_values=(100,), margin="mu/n")
    p = cfg.params_for(100, 0)
    assert (p.lam, p.mu) == (10, 5) and p.margin == pytest.approx(0.05)
    p = SweepConfig(n_values=(1600,)).params_for(1600, 7)
    assert (p.lam, p.mu, p.margin) == (40, 8, 0.5)
    assert p.seed == derive_seed(0, 1600, 7)


def test_from_mapping():
    cfg = SweepConfig.from_mapping({"n_values": "10, 20 40", "replicates": "3", "max_generations": "1e3"})
    assert cfg.n_values == (10, 20, 40) and cfg.replicates == 3 and cfg.max_generations == 1000
    with pytest.raises(InvalidParameterError, match="unknown"):
        SweepConfig.from_mapping({"n_vals": "10"})


def test_derive_seed_distinct():
    seeds = {derive_seed(0, n, r) for n in (10, 20, 40) for r in range(50)}
    assert len(seeds) == 150
    assert derive_seed(1, 10, 0) != derive_seed(0, 10, 0)


def test_sweep_deterministic():
    a = run_sweep(small_config())
    b = run_sweep(small_config())
    assert a == b
    assert [(r.n, r.replicate) for r in a] == [(n, r) for n in (10, 20) for r in range(4)]
    assert run_sweep(small_config(master_seed=4)) != a


def test_sweep_parallel_matches_serial():
    assert run_sweep(small_config(), jobs=2) == run_sweep(small_config(), jobs=1)


def test_empty_sweep():
    rows = run_sweep(SweepConfig(n_values=()))
    assert rows == [] and summarize(rows).rows == ()


@pytest.mark.slow
def test_sweep_n100_small_borders_all_succeed():
    rows = run_sweep(SweepConfig(n_values=(100,), replicates=10, margin="mu/n"))
    summary = summarize(rows)
    assert summary.rows[0].success_rate == 1.0
    for r in rows:
        assert r.record.first_hit_evals <= r.record.samples_T


def test_summary_failed_runs_excluded():
    def rec(hit, evals):
        return RunRecord(hit, 3, 30, evals if hit else None, 0)

    rows = [SweepRow(5, 0, rec(True, 12)), SweepRow(5, 1, rec(False, 0)), SweepRow(7, 0, rec(False, 0))]
    s = summarize(rows)
    assert s.rows[0].mean == 12 and s.rows[0].success_rate == 0.5
    assert (s.rows[0].ci_lo, s.rows[0].ci_hi) == (12, 12)
    assert math.isnan(s.rows[1].mean) and s.rows[1].success_rate == 0
    assert summarize(rows, counter="samples_T").rows[0].mean == 30


# --- bootstrap ---------------------------------------------------------------


def reference_bootstrap(data, B, level, seed):
    """Independent implementation on the stdlib RNG with the same percentile rule."""
    rnd = random.Random(seed)
    n = len(data)
    means = sorted(sum(data[rnd.randrange(n)] for _ in range(n)) / n for _ in range(B))

    def pct(q):
        pos = q * (B - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, B - 1)
        return means[lo] + (pos - lo) * (means[hi] - means[lo])

    a = (1 - level) / 2
    return pct(a), pct(1 - a)


def test_bootstrap_constant():
    assert bootstrap_ci([7.0] * 10) == (7.0, 7.0)


def test_bootstrap_one_to_hundred():
    data = list(range(1, 101))
    lo, hi = bootstrap_ci(data, B=2000, seed=11)
    ref_lo, ref_hi = reference_bootstrap(data, 2000, 0.95, 11)
    # normal theory: 50.5 -/+ 1.96 * 29.01 / 10
    assert lo == pytest.approx(44.81, abs=1.0) and hi == pytest.approx(56.19, abs=1.0)
    assert lo == pytest.approx(ref_lo, abs=1.0) and hi == pytest.approx(ref_hi, abs=1.0)


def test_bootstrap_width_shrinks():
    rng = np.random.default_rng(0)
    small = rng.exponential(size=25)
    large = rng.exponential(size=2500)
    w_small = np.subtract(*bootstrap_ci(small, B=500)[::-1])
    w_large = np.subtract(*bootstrap_ci(large, B=500)[::-1])
    assert w_large < w_small / 5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.integers(0, 2**32))
def test_bootstrap_ordered_and_within_range(data, seed):
    lo, hi = bootstrap_ci(data, B=50, seed=seed)
    assert lo <= hi
    assert min(data) - 1e-6 <= lo and hi <= max(data) + 1e-6
    assert bootstrap_ci(data, B=50, seed=seed) == (lo, hi)


def test_bootstrap_rejects():
    with pytest.raises(InvalidInputError):
        bootstrap_ci([])
    with pytest.raises(InvalidParameterError):
        bootstrap_ci([1.0], level=1.0)


# --- fitting -----------------------------------------------------------------

N = np.array([100.0, 200, 400, 800, 1600])


def test_fit_exact_data():
    models = {m.name: m for m in growth_models()}
    y = 2.5 * N * np.log(N)
    fit = fit_model(N, y, models["n log n"])
    assert fit.coefficient == pytest.approx(2.5, rel=1e-12)
    assert fit.correlation == pytest.approx(1.0, abs=1e-12)
    fit2 = fit_model(N, 0.01 * N**2, models["n^2"])
    assert fit2.coefficient == pytest.approx(0.01)


def test_fit_log_base_scales_coefficient():
    y = 3.0 * N * np.log(N)
    c_e = fit_model(N, y, growth_models()[0]).coefficient
    c_2 = fit_model(N, y, growth_models(2.0)[0]).coefficient
    assert c_2 == pytest.approx(c_e * math.log(2), rel=1e-12)


def test_fit_matches_scalar_minimiser():
    rng = np.random.default_rng(5)
    y = 0.3 * N**1.5 * (1 + 0.05 * rng.standard_normal(N.size))
    model = growth_models()[1]
    g = model.g(N)
    res = minimize_scalar(lambda c: float(np.sum((y - c * g) ** 2)), bracket=(0, 1), tol=1e-12)
    fit = fit_model(N, y, model)
    assert fit.coefficient == pytest.approx(res.x, rel=1e-9)
    assert fit.correlation == pytest.approx(np.corrcoef(y, g)[0, 1], abs=1e-12)


def test_fit_degenerate():
    m = growth_models()[0]
    with pytest.raises(InvalidInputError):
        fit_model([100.0], [1.0], m)
    with pytest.raises(InvalidInputError):
        fit_model(N, np.full(N.size, 5.0), m)
    with pytest.raises(InvalidInputError):
        fit_model(N, [1, 2, math.nan, 4, 5], m)
    with pytest.raises(InvalidInputError):
        fit_model(N, N, GrowthModel("zero", lambda n: 0 * n))


def summary_of(y):
    return ExperimentSummary(tuple(SummaryRow(int(n), float(v), float(v), float(v), 1.0) for n, v in zip(N, y)))


@pytest.mark.parametrize("true", ["n log n", "n^{3/2}", "n^2"])
def test_compare_models_recovers_planted(true):
    g = {m.name: m.g for m in growth_models()}[true]
    rng = np.random.default_rng(9)
    y = 1.7 * g(N) * (1 + 0.01 * rng.standard_normal(N.size))
    fits = compare_models(summary_of(y))
    assert fits[0].model == true
    assert [f.correlation for f in fits] == sorted((f.correlation for f in fits), reverse=True)
    assert "Correlation coefficient" in format_fit_table(fits)


def test_compare_models_needs_three_sizes():
    with pytest.raises(InvalidInputError):
        compare_models(summary_of([1.0, 2.0]))


# --- files -------------------------------------------------------------------


def test_runs_csv_roundtrip(tmp_path):
    rows = run_sweep(small_config(max_generations=3))
    rows.append(SweepRow(99, 0, RunRecord(False, 5, 50, None, 17)))
    write_runs_csv(tmp_path / "runs.csv", rows)
    assert read_runs_csv(tmp_path / "runs.csv") == rows
    text = (tmp_path / "runs.csv").read_text().splitlines()
    assert text[0] == "# schema_version: 1"
    assert text[1] == "n,replicate,seed,hit,generations,samples_T,first_hit_evals"


def test_summary_csv_roundtrip(tmp_path):
    s = ExperimentSummary((SummaryRow(10, 1.5, 1.0, 2.0, 1.0), SummaryRow(20, math.nan, math.nan, math.nan, 0.0)))
    write_summary_csv(tmp_path / "s.csv", s)
    back = read_summary_csv(tmp_path / "s.csv")
    assert back.rows[0] == s.rows[0] and math.isnan(back.rows[1].mean)


def test_csv_header_mismatch(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        read_summary_csv(tmp_path / "bad.csv")


def test_fits_json_and_svg(tmp_path):
    y = 2.0 * N * np.log(N)
    s = ExperimentSummary(tuple(SummaryRow(int(n), v, 0.9 * v, 1.1 * v, 1.0) for n, v in zip(N, y)))
    fits = compare_models(s)
    write_fits_json(tmp_path / "fits.json", fits)
    data = json.loads((tmp_path / "fits.json").read_text())
    assert [d["model"] for d in data] == [f.model for f in fits]
    assert all(d["schema_version"] == 1 for d in data)
    plot_summary_svg(tmp_path / "a.svg", s, fits)
    plot_summary_svg(tmp_path / "b.svg", s, fits)
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert (tmp_path / "a.svg").read_text().lstrip().startswith("<?xml")
