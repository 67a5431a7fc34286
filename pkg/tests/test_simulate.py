import numpy as np
import pytest

from dsp_pricing.bundle import deterministic, truncated_poisson, uniform
from dsp_pricing.errors import DomainError
from dsp_pricing.exact import get_table
from dsp_pricing.routing import Instance, tsp_tour
from dsp_pricing.simulate import (leftover_destinations, location_pickup_frequencies, mc_expected_pickups,
                                  simulate_circle)


@pytest.mark.parametrize("F", [deterministic(2), uniform(1, 3), truncated_poisson(10.0, 20)],
                         ids=["det2", "unif13", "tpois"])
def test_trace_bundles_are_disjoint(F):
    for seed in range(5):
        tr = simulate_circle(60, 0.5, F, 3.0, seed)
        bundles = tr.bundles()
        taken = set()
        for b in bundles:
            assert not (b & taken)
            taken |= b
        assert taken | tr.leftover == set(range(60))
        assert not (taken & tr.leftover)
        assert tr.picked_count_at(3.0) == 60 - len(tr.leftover)
        times = [a[0] for a in tr.accepted]
        assert times == sorted(times) and all(0 <= t <= 3.0 for t in times)


def test_picked_count_is_a_step_function():
    tr = simulate_circle(40, 1.0, uniform(1, 3), 2.0, 11)
    counts = [tr.picked_count_at(t) for t in np.linspace(0, 2, 50)]
    assert counts[0] == 0 or tr.accepted[0][0] == 0
    assert all(b >= a for a, b in zip(counts, counts[1:]))


def test_same_seed_same_trace():
    a = simulate_circle(100, 0.3, uniform(1, 3), 4.0, 42)
    b = simulate_circle(100, 0.3, uniform(1, 3), 4.0, 42)
    assert a.accepted == b.accepted and a.leftover == b.leftover
    assert mc_expected_pickups(20, 1.0, deterministic(2), 1.0, 5000, 9) == \
        mc_expected_pickups(20, 1.0, deterministic(2), 1.0, 5000, 9)


def test_workers_do_not_change_result():
    args = (30, 0.7, uniform(1, 3), 1.5, 20000, 5)
    assert mc_expected_pickups(*args, workers=1) == mc_expected_pickups(*args, workers=3)


@pytest.mark.parametrize("F", [deterministic(2), deterministic(3), uniform(1, 3)], ids=["det2", "det3", "unif13"])
@pytest.mark.parametrize("n", [4, 9, 25])
def test_vectorized_matches_exact(F, n):
    exact = get_table(F, n).pickups_circle(1.2, n, 0.8)
    mean, se = mc_expected_pickups(n, 0.8, F, 1.2, 20000, seed=n)
    assert abs(mean - exact) <= 4 * se


def test_event_loop_matches_exact():
    # the scalar trace engine is an independent implementation of the process
    F, n, lam, T = uniform(1, 3), 12, 0.6, 2.0
    picked = [n - len(simulate_circle(n, lam, F, T, s).leftover) for s in range(4000)]
    exact = get_table(F, n).pickups_circle(T, n, lam)
    se = np.std(picked, ddof=1) / np.sqrt(len(picked))
    assert abs(np.mean(picked) - exact) <= 4 * se


def test_locations_are_exchangeable():
    reps = 20000
    freq = location_pickup_frequencies(15, 0.5, uniform(1, 3), 2.0, reps, seed=2)
    se = np.sqrt(freq.mean() * (1 - freq.mean()) / reps)
    assert freq.max() - freq.min() <= 5 * se


def test_oversized_bundles_rejected():
    # a circle of 3 can only ever serve bundles of size <= 3
    tr = simulate_circle(3, 5.0, deterministic(4), 10.0, 0)
    assert tr.accepted == [] and len(tr.leftover) == 3


def test_zero_rate():
    mean, se = mc_expected_pickups(10, 0.0, deterministic(2), 5.0, 100, 0)
    assert mean == 0.0 and se == 0.0
    assert simulate_circle(10, 0.0, deterministic(2), 5.0, 0).accepted == []


def test_input_validation():
    with pytest.raises(DomainError):
        simulate_circle(0, 1.0, deterministic(2), 1.0, 0)
    with pytest.raises(DomainError):
        mc_expected_pickups(5, -1.0, deterministic(2), 1.0, 100, 0)
    with pytest.raises(DomainError):
        mc_expected_pickups(5, 1.0, deterministic(2), 1.0, 1, 0)


def test_leftover_destinations_follow_tour():
    rng = np.random.default_rng(0)
    inst = Instance(rng.uniform(0, 5, (30, 2)), np.array([2.5, 2.5]))
    with pytest.raises(DomainError):
        leftover_destinations(simulate_circle(30, 0.2, uniform(1, 3), 2.0, 1), inst)
    inst = inst.with_order(tsp_tour(inst).order)
    tr = simulate_circle(30, 0.2, uniform(1, 3), 2.0, 1)
    pts = leftover_destinations(tr, inst)
    want = inst.points[inst.order[sorted(tr.leftover)]]
    assert np.array_equal(pts, want)
    with pytest.raises(DomainError):
        leftover_destinations(simulate_circle(31, 0.2, uniform(1, 3), 2.0, 1), inst)
