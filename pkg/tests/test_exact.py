import math

import numpy as np
import pytest

from conftest import TEST_PMFS, brute_force_remaining
from dsp_pricing.bundle import deterministic, truncated_poisson, uniform
from dsp_pricing.errors import CapExceededError, DomainError
from dsp_pricing.exact import (ExpectationQuery, build_gamma, expected_pickups_circle,
                               expected_pickups_line, expected_remaining_line, get_table, ode_residual,
                               spot_validate)


def test_small_closed_forms():
    tab = get_table(deterministic(2), 10)
    assert tab.gamma[2, 2] == pytest.approx(2.0, abs=1e-15)
    assert tab.gamma[2, 1] == pytest.approx(0.0, abs=1e-15)
    # one package alone can never be taken by a pair request
    assert tab.remaining_line(3.0, 1, 1.0) == 1.0
    assert tab.remaining_line(1.0, 3, 1.0) == pytest.approx(1 + 2 * math.exp(-2), abs=1e-13)
    for lam, t in [(1.0, 1.0), (0.3, 2.0), (2.0, 0.1)]:
        q = ExpectationQuery(t, 2, lam)
        assert expected_pickups_line(q, tab) == pytest.approx(2 * (1 - math.exp(-lam * t)), abs=1e-13)
        assert expected_pickups_circle(q, tab) == pytest.approx(2 * (1 - math.exp(-2 * lam * t)), abs=1e-13)


def test_single_package_bundles_decouple():
    tab = get_table(deterministic(1), 30)
    for n in (1, 7, 30):
        for t in (0.2, 1.5):
            assert tab.pickups_circle(t, n, 0.7) == pytest.approx(n * (1 - math.exp(-0.7 * t)), rel=1e-12)
            assert n - tab.remaining_line(t, n, 0.7) == pytest.approx(n * (1 - math.exp(-0.7 * t)), rel=1e-12)


@pytest.mark.parametrize("name", ["det:2", "det:3", "uniform:1..3", "uniform:2..4"])
@pytest.mark.parametrize("circle", [False, True], ids=["line", "circle"])
def test_against_markov_chain(name, circle):
    F = TEST_PMFS[name]
    tab = get_table(F, 8)
    for n in range(1, 8):
        for lam, t in [(1.0, 0.5), (0.4, 3.0)]:
            want = brute_force_remaining(n, lam, F, t, circle)
            got = tab.remaining_circle(t, n, lam) if circle else tab.remaining_line(t, n, lam)
            assert got == pytest.approx(want, abs=1e-10), (n, lam, t)


def test_tpois_small_circle_against_markov_chain():
    # circle smaller than the largest bundle: oversized requests are rejected
    F = truncated_poisson(10.0, 20)
    tab = get_table(F, 8)
    for n in (2, 5, 8):
        assert tab.remaining_circle(2.0, n, 1.0) == pytest.approx(
            brute_force_remaining(n, 1.0, F, 2.0, True), abs=1e-10)


def test_strict_circle_refuses_small_n():
    F = uniform(1, 3)
    tab = get_table(F, 5)
    with pytest.raises(DomainError):
        expected_pickups_circle(ExpectationQuery(1.0, 2, 1.0), tab, strict=True)


def test_query_validation():
    for bad in [dict(t=-1, n=3, lam=1), dict(t=1, n=0, lam=1), dict(t=1, n=2.5, lam=1),
                dict(t=1, n=3, lam=-0.1), dict(t=math.inf, n=3, lam=1)]:
        with pytest.raises(DomainError):
            ExpectationQuery(**bad)


def test_cap():
    with pytest.raises(CapExceededError):
        build_gamma(deterministic(2), 50, cap=20)
    tab = get_table(deterministic(2), 10)
    with pytest.raises(CapExceededError):
        tab.remaining_line(1.0, 11, 1.0)


def test_table_is_read_only():
    tab = get_table(deterministic(3), 10)
    with pytest.raises(ValueError):
        tab.gamma[3, 3] = 0.0


def test_bounds_and_monotone_in_t(pmf):
    tab = get_table(pmf, 60)
    ts = np.linspace(0, 10, 41)
    for n in (1, 5, 23, 60):
        R = [tab.remaining_line(t, n, 0.8) for t in ts]
        assert all(b <= a + 1e-9 for a, b in zip(R, R[1:]))
        for t in ts:
            K = n - tab.remaining_line(t, n, 0.8)
            C = tab.pickups_circle(t, n, 0.8)
            assert -1e-9 <= K <= n + 1e-9 and -1e-9 <= C <= n + 1e-9
        assert tab.pickups_circle(0.0, n, 0.8) == pytest.approx(0.0, abs=1e-9)


def test_ode_residual(pmf):
    tab = get_table(pmf, 25)
    for n in (1, 2, 5, 12, 25):
        for t in (0.3, 1.0, 4.0):
            assert ode_residual(ExpectationQuery(t, n, 1.0), tab, 1e-4) <= 1e-5


def test_ode_residual_second_order():
    tab = get_table(uniform(1, 3), 20)
    q = ExpectationQuery(1.0, 15, 1.0)
    hs = [0.2, 0.1, 0.05]
    res = [ode_residual(q, tab, h) for h in hs]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 1.8


def test_monotonicity_lemma(pmf):
    m, mu = pmf.m, pmf.mean
    kappa = (m + 1) / (m - mu + 1)
    tab = get_table(pmf, 200)
    for t in (0.5, 2.0, 8.0):
        vals = [n - tab.remaining_line(t, n, 1.0) + n * kappa for n in range(m, 201)]
        assert min(np.diff(vals)) >= -1e-9


def test_sandwich(pmf):
    m, mu = pmf.m, pmf.mean
    kappa = (m + 1) / (m - mu + 1)
    tab = get_table(pmf, 120)
    for t in (0.5, 2.0, 8.0):
        for n in range(2 * m, 121):
            K = lambda k: k - tab.remaining_line(t, k, 1.0)
            C = tab.pickups_circle(t, n, 1.0)
            assert K(n - m) - m - m * kappa - 1e-9 <= C <= mu + K(n) + m * kappa + 1e-9


def test_large_table_stays_stable():
    tab = get_table(truncated_poisson(10.0, 20), 2000)
    assert np.isfinite(tab.gamma).all() and np.isfinite(tab.gamma_tilde).all()
    C = tab.pickups_circle(8.0, 2000, 0.07)
    assert 0 < C < 2000


def test_spot_validate_small():
    tab = get_table(uniform(1, 3), 40)
    rows = spot_validate(tab, lam=1.0, t=1.0, reps=3000, seed=3)
    assert [r["n"] for r in rows] == [10, 20, 40]
    assert all(r["ok"] for r in rows)


def test_line_query_wrappers():
    tab = get_table(deterministic(2), 5)
    q = ExpectationQuery(0.7, 5, 1.3)
    assert expected_remaining_line(q, tab) + expected_pickups_line(q, tab) == pytest.approx(5.0)
