import numpy as np
import pytest

from dsp_pricing.errors import ConfigError, DomainError
from dsp_pricing.scenarios import (CLUSTER_LAYOUT, Scenario, cluster_counts, default_params,
                                   gen_three_clusters, gen_uniform_square, run_case_study)


def test_uniform_square():
    P = gen_uniform_square(500, 5.0, seed=1)
    assert P.shape == (500, 2) and P.min() >= 0 and P.max() <= 5
    assert np.array_equal(P, gen_uniform_square(500, 5.0, seed=1))
    with pytest.raises(DomainError):
        gen_uniform_square(0)


def test_three_clusters_layout():
    P = gen_three_clusters(seed=3)
    assert P.shape == (2000, 2)
    start = 0
    for count, (_, cx, cy, ax, ay) in zip(cluster_counts(2000), CLUSTER_LAYOUT):
        part = P[start:start + count]
        start += count
        if cx is None:
            assert part.min() >= 0 and part.max() <= 5
        else:
            assert (((part[:, 0] - cx) / ax) ** 2 + ((part[:, 1] - cy) / ay) ** 2 <= 1 + 1e-12).all()
    assert cluster_counts(2000) == [500, 700, 500, 300]
    assert sum(cluster_counts(1000)) == 1000 and sum(cluster_counts(777)) == 777


def test_ellipse_sampling_is_uniform():
    # the fraction of a uniform ellipse sample inside the half-size ellipse is 1/4
    P = gen_three_clusters(seed=0, n=20000)[5000:12000]
    cx, cy, ax, ay = CLUSTER_LAYOUT[1][1:]
    inner = (((P[:, 0] - cx) / (ax / 2)) ** 2 + ((P[:, 1] - cy) / (ay / 2)) ** 2 <= 1).mean()
    assert inner == pytest.approx(0.25, abs=0.015)


def test_scenario_validation_and_depot():
    assert Scenario("uniform").kind == "uniform_square"
    assert np.allclose(Scenario("clusters").depot_xy(), [2.5, 2.5])
    assert np.allclose(Scenario(depot="corner").depot_xy(), [0, 0])
    with pytest.raises(ConfigError):
        Scenario("hexagons")
    with pytest.raises(ConfigError):
        Scenario("csv")
    with pytest.raises(ConfigError):
        Scenario(depot="north")
    pts = np.ones((4, 2))
    s = Scenario("csv", points=pts)
    assert s.n == 4 and np.array_equal(s.generate(3), pts)
    a, b = Scenario(seed=2, n=50), Scenario(seed=2, n=50)
    assert np.array_equal(a.generate(1), b.generate(1))
    assert not np.array_equal(a.generate(1), a.generate(2))


def test_default_params():
    params, model, F = default_params()
    assert params.V == 200 and params.A == 25 and params.T == 8
    assert model(1.0) == pytest.approx(0.07)
    assert F.m == 20


@pytest.fixture(scope="module")
def small_report():
    return run_case_study(Scenario("uniform", n=300, seed=5), n_seeds=3)


def test_report_identity(small_report):
    for r in small_report.per_seed:
        assert r.improvement_pct == 100.0 * (r.cost_van_only - r.cost_mixed) / r.cost_van_only
        assert r.cost_mixed >= r.payments
        assert 0 <= r.leftover_count <= 300
    vals = [r.improvement_pct for r in small_report.per_seed]
    assert small_report.improvement_pct[0] == pytest.approx(np.mean(vals), rel=1e-12)
    d = small_report.to_dict()
    assert d["scenario"]["kind"] == "uniform_square" and len(d["per_seed"]) == 3


def test_case_study_deterministic_and_thread_safe(small_report):
    again = run_case_study(Scenario("uniform", n=300, seed=5), n_seeds=3, workers=2)
    assert again.to_dict() == small_report.to_dict()


def test_zero_rate_means_no_savings():
    rep = run_case_study(Scenario("uniform", n=200, seed=1), n_seeds=2, lam_override=0.0)
    for r in rep.per_seed:
        assert r.leftover_count == 200 and r.payments == 0.0
        assert r.improvement_pct <= 1e-9


def test_overrides():
    rep = run_case_study(Scenario("uniform", n=150, seed=1), {"a": 0.0, "b": 0.0}, n_seeds=1)
    assert rep.params["a"] == 0.0 and rep.per_seed[0].leftover_count == 150
    with pytest.raises(ConfigError):
        run_case_study(Scenario("uniform", n=50), {"warp_speed": 9}, n_seeds=1)
