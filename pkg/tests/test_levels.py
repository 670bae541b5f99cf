import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from umdakit.errors import InvalidInputError, PreconditionError
from umdakit.levels import (
    Case,
    LevelParams,
    all_ones_probability,
    check_upper_block,
    check_G1_cases,
    check_G2_arithmetic,
    classify_case,
    expected_time_bound,
    g3_min_lambda,
    hypothesis_population,
    level_battery,
    level_of,
    upgrade_probability,
    z_lower_bound,
)
from umdakit.model import make_rng, new_uniform, ProbabilisticModel
from umdakit.pbdist import compute_eta
from umdakit.umda import UmdaParams

E = math.e


def test_level_of():
    assert level_of(0, 10) == 1
    assert level_of(10, 10) == 11
    assert level_of(3, 10) == 4
    with pytest.raises(InvalidInputError):
        level_of(11, 10)


def test_upgrade_probability_examples():
    assert upgrade_probability(new_uniform(4, 2, 0.5), 2) == pytest.approx(11 / 16)
    assert upgrade_probability(new_uniform(4, 2, 0.5), 0) == 1.0
    n = 8
    top = ProbabilisticModel(np.full(n, 1 - 1 / n), mu=4, margin=4 / n)
    assert upgrade_probability(top, n) == pytest.approx((1 - 1 / n) ** n, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=40))
def test_upgrade_probability_monotone(marg):
    vals = [upgrade_probability(marg, j) for j in range(len(marg) + 1)]
    assert vals[0] == 1.0
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_classify_case_examples():
    assert classify_case(7, 0, 3, 7, 100, 0.5) is Case.CASE1
    assert classify_case(0, 99, 100, 10, 100, 0.5) is Case.CASE2  # 100 >= 100*0.9 + 1
    assert classify_case(3, 20, 50, 7, 100, 0.5) is Case.CASE3
    assert 3 < 0.5 * (100 - 50 + 1)
    with pytest.raises(InvalidInputError):
        classify_case(60, 50, 10, 5, 100, 0.5)


@given(st.integers(2, 80), st.data())
def test_classify_case_total(n, data):
    k = data.draw(st.integers(0, n))
    l = data.draw(st.integers(0, n - k))
    j = data.draw(st.integers(1, n))
    mu = data.draw(st.integers(1, n))
    case = classify_case(k, l, j, mu, n, 0.5)
    in_case2 = k < mu and j >= n * (1 - 1 / mu) + 1 - 1e-9
    assert (case is Case.CASE1) == (k >= mu)
    assert (case is Case.CASE2) == in_case2
    if case is Case.CASE3 and mu <= math.sqrt(n * 0.5):
        assert k < 0.5 * (n - j + 1)


def test_z_lower_bound():
    n = 50
    assert z_lower_bound(n, n, 0.5) == pytest.approx(1 / (14 * E * n))
    assert z_lower_bound(n, 1, 0.5) == pytest.approx(1 / (14 * E))
    assert z_lower_bound(n, 1, 0.05) == pytest.approx(0.05 / (2 * E))
    z = [z_lower_bound(n, j, 0.3) for j in range(1, n + 1)]
    assert all(a >= b for a, b in zip(z, z[1:]))


def test_g3_min_lambda():
    assert g3_min_lambda(0.5, 1.0, 2, 1.0) == pytest.approx(44.3614195558365, rel=1e-12)
    assert g3_min_lambda(0.5, 1.0, 4, 1.0) - g3_min_lambda(0.5, 1.0, 2, 1.0) == pytest.approx(8 * math.log(2))
    assert g3_min_lambda(0.5, 1.0, 2, 0.5) > g3_min_lambda(0.5, 1.0, 2, 1.0)


def test_expected_time_bound():
    assert expected_time_bound([1.0], 1.0, 10) == pytest.approx(124.42297860854737, rel=1e-12)
    assert expected_time_bound([0.2, 0.5], 1.0, 10) >= expected_time_bound([0.3, 0.5], 1.0, 10)
    z, lam, delta = 0.01, 50, 0.7
    one = 8 / delta**2 * (lam * math.log(6 * delta * lam / (4 + z * delta * lam)) + 1 / z)
    assert expected_time_bound([z] * 9, delta, lam) == pytest.approx(9 * one, rel=1e-12)


def test_level_params_for_umda():
    lp = LevelParams.for_umda(100, 5, 400, 0.5)
    assert lp.m == 101 and lp.gamma0 == 5 / 400 and lp.delta == 1.0
    assert lp.z_star == pytest.approx(z_lower_bound(100, 100, 0.5))
    assert LevelParams.for_umda(100, 5, 400, 0.25).delta == pytest.approx(1 / 3)


def test_upper_block_all_l():
    for n in (2, 10, 50, 100, 200, 1000):
        rep = check_upper_block(n)
        assert rep.satisfied
        assert rep.statistic == pytest.approx((1 - 1 / n) ** (n - 1), rel=1e-12)
    assert all_ones_probability(50, 0) == 1.0


# --- G2 ----------------------------------------------------------------------


def g2_instance(n, mu, j, upgraded):
    """Top mu parents: ``upgraded`` with j ones, rest with j-1, all sharing a prefix of j-1 ones."""
    rows = np.zeros((mu, n), dtype=np.uint8)
    rows[:, : j - 1] = 1
    rows[:upgraded, j - 1] = 1
    return rows


def test_g2_constructed_instance():
    n, mu, c, j = 50, 5, 0.5, 26
    lam = math.ceil(13 * E * mu / (1 - c))
    rows = g2_instance(n, mu, j, 1)
    rep = check_G2_arithmetic(rows.sum(axis=0), mu, lam, 1 / lam, j, c=c)
    assert rep.satisfied, rep.witness
    assert rep.details["k"] == 1 and rep.details["l"] == j - 1
    for name, (value, bound, ok) in rep.details["checks"].items():
        assert ok, name


def test_g2_gamma_equals_gamma0():
    n, mu, c, j = 50, 5, 0.5, 20
    lam = math.ceil(13 * E * mu / (1 - c))
    rows = g2_instance(n, mu, j, mu)
    rep = check_G2_arithmetic(rows.sum(axis=0), mu, lam, mu / lam, j, c=c)
    assert rep.details["checks"]["sum_X"][0] >= mu * j
    assert rep.satisfied


def test_g2_precondition():
    n, mu, j = 50, 5, 26
    rows = g2_instance(n, mu, j, 0)
    with pytest.raises(PreconditionError, match="below"):
        check_G2_arithmetic(rows.sum(axis=0), mu, 200, 1 / 200, j)
    with pytest.raises(PreconditionError):
        check_G2_arithmetic(rows.sum(axis=0), mu, 200, 0.5, j)


def test_g2_fails_outside_lambda_regime():
    # lam = mu gives gamma0 = 1; the growth factor 1/(1-c) cannot be met
    n, mu, j = 50, 5, 26
    rows = g2_instance(n, mu, j, mu)
    rep = check_G2_arithmetic(rows.sum(axis=0), mu, mu, 1.0, j, c=0.5)
    assert not rep.satisfied and "growth" in rep.witness


# --- G1 ----------------------------------------------------------------------


def test_g1_case1_instance():
    n, mu, l = 60, 10, 10
    sums = np.array([5] * 20 + [mu] * l + [0] * 30)
    params = UmdaParams(n, 300, mu, mu / n)
    rep = check_G1_cases(sums, params, 0.5)
    d = rep.details
    assert d["case"] == "Case1" and (d["k"], d["l"], d["j"]) == (20, l, 31 - 10)
    eta = compute_eta()
    assert d["notes"]["sigma_k"] == pytest.approx(math.sqrt(5))
    assert d["exact_prob"] >= (0.5 - 0.4688 / math.sqrt(9 / 10)) / E
    assert d["case_bound"] == pytest.approx((0.5 - eta / math.sqrt(5)) / E)
    assert rep.satisfied


def test_g1_case2_instance():
    n, mu = 50, 5
    sums = np.array([mu] * (n - 1) + [0])
    rep = check_G1_cases(sums, UmdaParams(n, 200, mu, mu / n), 0.5)
    d = rep.details
    assert d["case"] == "Case2" and d["j"] == n and d["k"] == 0
    assert d["exact_prob"] == pytest.approx((1 - 1 / n) ** (n - 1) / n, rel=1e-12)
    assert d["exact_prob"] >= 1 / (14 * E * mu)
    assert d["case_bound"] is None  # mu < 14
    assert rep.satisfied


def test_case2_bound_needs_an_interior_position():
    # with k = 0 and n > 14 mu the 1/(14 e mu) value overstates the upgrade probability
    n, mu = 1000, 20
    sums = np.array([mu] * (n - 1) + [0])
    rep = check_G1_cases(sums, UmdaParams(n, 1500, mu, mu / n), 0.5)
    assert rep.details["exact_prob"] < 1 / (14 * E * mu)
    assert rep.details["case_bound"] is None
    assert rep.satisfied


def test_case2_bound_asserted_with_mu_14():
    n, mu = 1000, 20
    rows = np.zeros((mu, n), dtype=np.uint8)
    j = 990
    rows[:, : j - 2] = 1
    rows[: mu // 2, j - 2] = 1
    rows[mu // 2 :, j - 1] = 1
    rep = check_G1_cases(rows.sum(axis=0), UmdaParams(n, 1500, mu, mu / n), 0.5)
    d = rep.details
    assert d["case"] == "Case2" and d["k"] == 2
    assert d["case_bound"] == pytest.approx(1 / (14 * E * mu))
    assert rep.satisfied


def test_g1_case3_instance():
    n, mu, l = 100, 7, 30
    sums = np.array([mu] * l + [0] * (n - l))
    rep = check_G1_cases(sums, UmdaParams(n, 200, mu, mu / n), 0.5)
    d = rep.details
    assert d["case"] == "Case3" and d["k"] == 0
    assert d["exact_prob"] >= (n - l) / (2 * E * n)
    assert d["notes"]["case3_k_small"]
    assert rep.satisfied


def test_g1_preconditions():
    params = UmdaParams(20, 100, 4, 0.2)
    with pytest.raises(PreconditionError):
        check_G1_cases(np.array([1] + [0] * 19), params, 0.5)
    with pytest.raises(PreconditionError):
        check_G1_cases(np.array([4] * 20), params, 0.5)
    with pytest.raises(InvalidInputError):
        check_G1_cases(np.array([5] * 20), params, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(10, 60), st.integers(0, 2**32), st.data())
def test_hypothesis_population_levels(n, seed, data):
    mu = data.draw(st.integers(1, 6))
    j = data.draw(st.integers(1, n - 1))
    up = data.draw(st.integers(0, mu))
    rows = hypothesis_population(n, mu, j, up, make_rng(seed))
    ones = rows.sum(axis=1)
    assert list(ones[:up]) == [j] * up
    assert list(ones[up:]) == [j - 1] * (mu - up)


@pytest.mark.parametrize("n", [50, 100, 200])
def test_battery_covers_every_case(n):
    recs = level_battery(n, 400, make_rng(n))
    assert all(r["satisfied"] for r in recs)
    assert {r["case"] for r in recs} == {"Case1", "Case2", "Case3", "G2"}
    for r in recs:
        assert r["exact_prob"] >= r["z_bound"]


def test_battery_fixed_mu_lambda():
    recs = level_battery(100, 50, make_rng(1), mu=6, lam=320, kind="G1")
    assert {r["mu"] for r in recs} == {6} and {r["kind"] for r in recs} == {"G1"}
    assert all(r["satisfied"] for r in recs)
