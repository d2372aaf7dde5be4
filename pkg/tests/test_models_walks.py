import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phi4log.greens import green_torus_exact
from phi4log.lattice import TorusLattice
from phi4log.mcstats import MIN_BATCHES, from_batches, jackknife, split_counts
from phi4log.models import WalkPath, intersection_local_time, star_mc, watermelon_mc, wsaw_tiny_oracle
from phi4log.models.walks import simulate_local_times

from conftest import agree_within_3sigma

ONE_SITE = TorusLattice(1, 2, 0)
TWO_SITES = TorusLattice(1, 2, 1)
THREE_SITES = TorusLattice(1, 3, 1)
SAMPLES = 200_000


def _combined_within(x, y, nsigma=3.0):
    return abs(x.mean - y.mean) <= nsigma * math.hypot(x.stderr, y.stderr)


# -- local times -----------------------------------------------------------------

def test_intersection_local_time_examples():
    assert intersection_local_time([WalkPath([0], [2.5])]) == 6.25
    assert intersection_local_time([WalkPath([0], [1.0]), WalkPath([0], [2.0])]) == 9.0
    p1, p2 = WalkPath([0, 1], [1.0, 2.0]), WalkPath([2, 3], [0.5, 1.5])
    assert intersection_local_time([p1, p2]) == intersection_local_time([p1]) + intersection_local_time([p2])


def _paths(draw_sites, draw_times):
    return [WalkPath(np.array(s), np.array(t)) for s, t in zip(draw_sites, draw_times)]


@pytest.mark.invariant
@settings(max_examples=100, deadline=None)
@given(st.data())
def test_superadditivity(data):
    p = data.draw(st.integers(1, 4))
    paths = []
    for _ in range(p):
        k = data.draw(st.integers(1, 8))
        sites = data.draw(st.lists(st.integers(0, 5), min_size=k, max_size=k))
        times = data.draw(st.lists(st.floats(0, 10), min_size=k, max_size=k))
        paths.append(WalkPath(np.array(sites), np.array(times)))
    total = intersection_local_time(paths, 6)
    assert total >= sum(intersection_local_time([q], 6) for q in paths) * (1 - 1e-12)
    for q in paths:
        assert abs(q.local_time(6).sum() - q.T) <= 1e-12 * max(q.T, 1)


def test_walk_path_checks():
    lat = TorusLattice(1, 4, 1)
    assert WalkPath([0, 1, 2, 3, 0], [1, 1, 1, 1, 1]).is_nearest_neighbour(lat)
    assert not WalkPath([0, 2], [1, 1]).is_nearest_neighbour(lat)
    with pytest.raises(ValueError):
        WalkPath([0, 1], [1.0])
    with pytest.raises(ValueError):
        WalkPath([0], [-1.0])
    with pytest.raises(ValueError):
        WalkPath([], [])


def test_simulated_local_times_add_up(rng):
    lat = TorusLattice(2, 3, 1)
    T = rng.exponential(3.0, 500)
    Lt, end = simulate_local_times(lat, 4, T, rng)
    assert np.allclose(Lt.sum(axis=1), T, rtol=1e-12, atol=0)
    assert np.all(Lt >= 0) and np.all((0 <= end) & (end < lat.sites))


def test_simulated_endpoint_law(rng):
    # P(X_T = 1) on the 2-site ring with jump rate 2 is (1 - exp(-4T))/2
    T = np.full(200_000, 0.3)
    _, end = simulate_local_times(TWO_SITES, 0, T, rng)
    p = (1 - math.exp(-1.2)) / 2
    assert abs(np.mean(end == 1) - p) < 4 * math.sqrt(p * (1 - p) / T.size)


# -- watermelon and star estimates ---------------------------------------------

def test_watermelon_p1_free_two_site():
    G = green_torus_exact(TWO_SITES, 1.0)
    ok, est = agree_within_3sigma(lambda s, seed: watermelon_mc(TWO_SITES, 0.0, 1.0, 0, 1, 1, s, seed), G(0, 1),
                                  SAMPLES)
    assert ok, est


def test_watermelon_p2_free_matches_wick():
    G = green_torus_exact(THREE_SITES, 1.0)
    ok, est = agree_within_3sigma(lambda s, seed: watermelon_mc(THREE_SITES, 0.0, 1.0, 0, 1, 2, s, seed),
                                  2 * G(0, 1) ** 2, SAMPLES)
    assert ok, est


@pytest.mark.invariant
def test_watermelon_matches_oracle():
    ref = wsaw_tiny_oracle(TWO_SITES, 0.05, 1.0, 0, 1, 1)
    ok, est = agree_within_3sigma(lambda s, seed: watermelon_mc(TWO_SITES, 0.05, 1.0, 0, 1, 1, s, seed), ref,
                                  SAMPLES)
    assert ok, est
    ref2 = wsaw_tiny_oracle(THREE_SITES, 0.1, 1.0, 0, 2, 2)
    ok, est = agree_within_3sigma(lambda s, seed: watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 2, 2, s, seed), ref2,
                                  SAMPLES)
    assert ok, est


def test_watermelon_power_bound():
    w1 = watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 1, 1, SAMPLES, 3)
    w2 = watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 1, 2, SAMPLES, 4)
    bound = 2 * w1.mean**2
    assert w2.mean <= bound + 3 * math.hypot(w2.stderr, 4 * w1.mean * w1.stderr)


@pytest.mark.invariant
def test_watermelon_endpoint_symmetry():
    ab = watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 2, 2, SAMPLES, 5)
    ba = watermelon_mc(THREE_SITES, 0.1, 1.0, 2, 0, 2, SAMPLES, 6)
    assert _combined_within(ab, ba)


def test_star_one_site():
    ok, est = agree_within_3sigma(lambda s, seed: star_mc(ONE_SITE, 0.0, 1.0, 1, s, seed), 1.0, SAMPLES)
    assert ok, est


def test_star_p1_is_susceptibility():
    star = star_mc(THREE_SITES, 0.1, 1.0, 1, SAMPLES, 7)
    parts = [watermelon_mc(THREE_SITES, 0.1, 1.0, 0, b, 1, SAMPLES, 8 + b) for b in range(3)]
    chi = sum(p.mean for p in parts)
    err = math.sqrt(star.stderr**2 + sum(p.stderr**2 for p in parts))
    assert abs(star.mean - chi) <= 3 * err


def test_star_power_bound():
    chi = star_mc(THREE_SITES, 0.1, 1.0, 1, SAMPLES, 11)
    s2 = star_mc(THREE_SITES, 0.1, 1.0, 2, SAMPLES, 12)
    assert s2.mean < 2 * chi.mean**2 + 3 * math.hypot(s2.stderr, 4 * chi.mean * chi.stderr)


def test_thread_count_does_not_change_results():
    one = watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 1, 2, 20_000, 21, threads=1)
    four = watermelon_mc(THREE_SITES, 0.1, 1.0, 0, 1, 2, 20_000, 21, threads=4)
    assert one == four
    assert star_mc(TWO_SITES, 0.1, 1.0, 2, 20_000, 3, threads=3) == star_mc(TWO_SITES, 0.1, 1.0, 2, 20_000, 3)


def test_estimate_structure():
    est = watermelon_mc(TWO_SITES, 0.1, 1.0, 0, 1, 1, 1000, 9)
    assert est.count == 1000 and est.seed == 9 and est.n_batches >= MIN_BATCHES and est.stderr >= 0


def test_mc_argument_errors():
    with pytest.raises(ValueError):
        watermelon_mc(TWO_SITES, 0.1, 1.0, 0, 1, 1, 0, 0)
    with pytest.raises(ValueError):
        watermelon_mc(TWO_SITES, 0.1, 0.0, 0, 1, 1, 100, 0)
    with pytest.raises(ValueError):
        star_mc(TWO_SITES, -0.1, 1.0, 1, 100, 0)


# -- batch statistics ------------------------------------------------------------

def test_batch_statistics():
    assert split_counts(35, 16) == [3, 3, 3] + [2] * 13
    with pytest.raises(ValueError):
        split_counts(10, 16)
    with pytest.raises(ValueError):
        from_batches(np.ones(8), np.ones(8), 0)
    bm = np.arange(16.0)
    est = from_batches(bm, np.full(16, 10), 1)
    assert est.mean == 7.5 and math.isclose(est.stderr, bm.std(ddof=1) / 4)
    m, e = jackknife(lambda x: 2 * x, bm)
    assert math.isclose(m, 15.0) and math.isclose(e, 2 * bm.std(ddof=1) / 4)
