import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from phi4log.greens import (bubble, bubble_constant, green_torus_exact, green_zd, green_zd_fourier, green_zd_table,
                            neumann_green, time_integral, walk_green_mc)
from phi4log.lattice import TorusLattice

from conftest import agree_within_3sigma

# G_00(0) on Z^4 from an independent scipy quad of int_0^inf ive(0, 2t)^4 dt,
# frozen (it agrees with both quadrature routes of the package to 1e-13)
G00_Z4 = 0.1549333902310602


def watson_g00():
    # Watson's closed form for the simple cubic lattice, G_00 = W / 6
    w = math.sqrt(6) / (32 * math.pi**3) * math.prod(special.gamma(k / 24) for k in (1, 5, 7, 11))
    return w / 6


def quad_oracle_origin(d, m2):
    f = lambda t: math.exp(-m2 * t) * special.ive(0, 2 * t) ** d
    pieces = [(0, 1), (1, 100), (100, 1e4), (1e4, 1e6), (1e6, np.inf)]
    return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=400)[0] for a, b in pieces)


def test_one_site_torus():
    G = green_torus_exact(TorusLattice(2, 3, 0), 4.0)
    assert G.entries.shape == (1, 1) and G(0, 0) == 0.25


def test_two_site_torus_from_eigendecomposition():
    # eigenvalues m2 (constant vector) and 4 + m2 (alternating vector)
    m2 = 1.0
    lam = np.array([m2, 4 + m2])
    U = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    oracle = U @ np.diag(1 / lam) @ U.T
    G = green_torus_exact(TorusLattice(1, 2, 1), m2)
    assert np.allclose(G.entries, oracle, atol=1e-15)
    assert abs(G(0, 0) - 0.6) < 1e-15 and abs(G(0, 1) - 0.4) < 1e-15


@pytest.mark.parametrize("shape", [(1, 5, 1), (2, 3, 1), (3, 2, 2)])
def test_torus_inverse_identity(shape):
    lat = TorusLattice(*shape)
    G = green_torus_exact(lat, 0.3).entries
    H = -lat.laplacian_matrix() + 0.3 * np.eye(lat.sites)
    assert np.max(np.abs(H @ G - np.eye(lat.sites))) < 1e-12
    assert np.array_equal(G, G.T) and np.all(G > 0)


def test_torus_needs_positive_mass():
    with pytest.raises(ValueError):
        green_torus_exact(TorusLattice(1, 2, 1), 0.0)


def test_origin_value_in_4d():
    assert abs(quad_oracle_origin(4, 0.0) - G00_Z4) < 1e-12
    assert abs(green_zd_fourier(4, 0.0, (0, 0, 0, 0)) - G00_Z4) < 1e-12
    assert abs(green_zd_fourier(4, 0.0, (0, 0, 0, 0), method="fourier") - G00_Z4) < 1e-10


def test_watson_integral_in_3d():
    assert abs(green_zd(3, 0.0, (0, 0, 0)) - watson_g00()) < 1e-12


def test_schwinger_and_fourier_routes_agree_off_origin():
    for x, m2 in [((1, 0, 0, 0), 0.0), ((2, 1, 0, 0), 0.05), ((3, 0, 0), 0.0)]:
        a = green_zd_fourier(len(x), m2, x)
        b = green_zd_fourier(len(x), m2, x, method="fourier", tol=1e-11)
        assert abs(a - b) < 1e-9 * a


def test_massless_decay_along_axis():
    x = (16, 0, 0, 0)
    target = 1 / (4 * math.pi**2)
    assert abs(256 * green_zd(4, 0.0, x) / target - 1) < 0.02


@pytest.mark.parametrize("d", [1, 2])
def test_massless_low_dimension_is_rejected(d):
    with pytest.raises(ValueError):
        green_zd(d, 0.0, (0,) * d)


def test_massive_low_dimension_is_fine():
    # 1-d closed form: G_0x = r^|x| / sqrt(m2 (m2 + 4)), r = 1 + m2/2 - sqrt(m2 + m2^2/4)
    m2 = 0.5
    r = 1 + m2 / 2 - math.sqrt(m2 + m2 * m2 / 4)
    for x in (0, 3):
        assert abs(green_zd(1, m2, (x,)) - r**x / math.sqrt(m2 * (m2 + 4))) < 1e-12


def test_green_table_lookup():
    tab = green_zd_table(4, 0.0, [(0, 0, 0, 0), (1, 0, 0, 0)])
    assert tab((0, 0, 0, 0), (0, 1, 0, 0)) == tab.entries[1]
    assert abs(tab((0, 0, 0, 0)) - G00_Z4) < 1e-12


@pytest.mark.invariant
@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 10.0), st.floats(1e-4, 10.0))
def test_origin_value_decreases_in_mass_and_dimension(m1, m2):
    lo, hi = sorted((m1, m2))
    if hi - lo < 1e-9 * hi:
        return
    g3, g4, g4h = green_zd(3, lo, (0, 0, 0)), green_zd(4, lo, (0, 0, 0, 0)), green_zd(4, hi, (0, 0, 0, 0))
    assert g4h < g4 < g3
    assert green_zd(5, lo, (0,) * 5) < g4


def test_time_integral_exact_cases():
    assert abs(time_integral(lambda t: -t, 0.0, 1e3) - 1) < 1e-12
    T = 1e12
    assert abs(time_integral(lambda t: -2 * np.log1p(t), 0.0, T) - T / (1 + T)) < 1e-10


# -- walk expansion ---------------------------------------------------------

def test_neumann_large_mass_converges_fast():
    lat = TorusLattice(1, 2, 1)
    G, terms = neumann_green(lat, 100.0, tail_tol=1e-10, return_terms=True)
    assert terms <= 10
    assert np.max(np.abs(G - green_torus_exact(lat, 100.0).entries)) < 1e-10


def test_neumann_zero_step_term():
    lat = TorusLattice(2, 2, 1)
    V = np.array([1.0, 2.0, 3.0, 4.0])
    G = neumann_green(lat, V, n_max=0, tail_tol=np.inf)
    assert np.allclose(G, np.diag(1 / (4 + V)))


def test_neumann_complex_potential(rng):
    lat = TorusLattice(2, 3, 1)
    V = 1 + rng.random(lat.sites) + 1j * rng.normal(size=lat.sites)
    G = neumann_green(lat, V, tail_tol=1e-10)
    exact = np.linalg.inv(-lat.laplacian_matrix() + np.diag(V))
    assert np.max(np.abs(G - exact)) < 1e-8


def test_neumann_rejects_nonpositive_potential():
    with pytest.raises(ValueError):
        neumann_green(TorusLattice(1, 2, 1), 0.0)
    with pytest.raises(ArithmeticError):
        neumann_green(TorusLattice(1, 2, 1), 1e-3, n_max=10)


SMALL_TORI = [(d, L, N) for d in (1, 2, 3, 4) for L in (2, 3, 4) for N in (0, 1, 2, 3) if (L**N) ** d <= 256]


@pytest.mark.invariant
@pytest.mark.parametrize("shape", SMALL_TORI)
@pytest.mark.parametrize("m2", [0.1, 1.0, 10.0])
def test_neumann_equals_dense_inverse(shape, m2):
    lat = TorusLattice(*shape)
    G = neumann_green(lat, m2, tail_tol=1e-10)
    assert np.max(np.abs(G - green_torus_exact(lat, m2).entries)) < 1e-10


@pytest.mark.invariant
@settings(max_examples=100, deadline=None)
@given(st.sampled_from(SMALL_TORI[:20]), st.floats(1e-3, 50.0), st.floats(1e-3, 50.0))
def test_torus_green_monotone_in_mass(shape, m1, m2):
    lat = TorusLattice(*shape)
    lo, hi = sorted((m1, m2))
    Glo, Ghi = green_torus_exact(lat, lo).entries, green_torus_exact(lat, hi).entries
    assert np.all(Glo >= Ghi - 1e-12 * Glo)
    assert np.all(Ghi > 0)


def test_walk_mc_one_site():
    lat = TorusLattice(1, 2, 0)
    ok, est = agree_within_3sigma(lambda s, seed: walk_green_mc(lat, 2.0, 0, 0, s, seed), 0.5, 20_000)
    assert ok, est


def test_walk_mc_two_site_matches_dense_inverse():
    lat = TorusLattice(1, 2, 1)
    G = green_torus_exact(lat, 1.0)
    for a, b in [(0, 0), (0, 1)]:
        ok, est = agree_within_3sigma(lambda s, seed: walk_green_mc(lat, 1.0, a, b, s, seed), G(a, b), 50_000)
        assert ok, (a, b, est)


def test_walk_mc_symmetric_in_endpoints():
    lat = TorusLattice(1, 3, 1)
    V = np.array([0.5, 1.0, 2.0])
    e1 = walk_green_mc(lat, V, 0, 2, 40_000, 1)
    e2 = walk_green_mc(lat, V, 2, 0, 40_000, 2)
    assert abs(e1.mean - e2.mean) <= 3 * math.hypot(e1.stderr, e2.stderr)


def test_walk_mc_needs_samples():
    with pytest.raises(ValueError):
        walk_green_mc(TorusLattice(1, 2, 1), 1.0, 0, 1, 0, 0)


def test_walk_mc_is_thread_count_independent():
    lat = TorusLattice(1, 3, 1)
    e1 = walk_green_mc(lat, 1.0, 0, 1, 3200, 9, threads=1)
    e4 = walk_green_mc(lat, 1.0, 0, 1, 3200, 9, threads=4)
    assert e1.batch_means == e4.batch_means


# -- bubble -------------------------------------------------------------------

def test_bubble_large_mass_dominated_by_origin():
    m2 = 1e4
    res = bubble(1, m2)
    assert abs(res.value * m2**2 / 9 - 1) < 5e-3


@pytest.mark.parametrize("n", [0, 1])
def test_bubble_log_slope(n):
    m2s = [1e-2, 1e-3, 1e-4]
    vals = [bubble(n, m2).value for m2 in m2s]
    slope = np.polyfit(np.log(1 / np.array(m2s)), vals, 1)[0]
    assert abs(slope / bubble_constant(n) - 1) < 0.10


def test_bubble_constants():
    assert abs(bubble_constant(0) - 1 / (2 * math.pi**2)) < 1e-15
    assert abs(bubble_constant(1) - 9 / (16 * math.pi**2)) < 1e-15


@pytest.mark.invariant
@settings(max_examples=100, deadline=None)
@given(st.integers(0, 12), st.floats(1e-3, 100.0))
def test_bubble_prefactor_is_exact(n, m2):
    assert math.isclose(bubble(n, m2).value, (n + 8) / 8 * bubble(0, m2).value, rel_tol=1e-14)


def test_bubble_truncated_sum_refines_and_flags():
    small = bubble(0, 1.0, radius=1)
    big = bubble(0, 1.0, radius=4)
    assert small.partial < big.partial <= big.value * (1 + 1e-10)
    assert small.flagged and not big.flagged
    assert abs(big.partial + big.tail - big.value) < 1e-15
    C, c = big.decay
    assert C > 0 and c > 0


def test_bubble_decreasing_in_mass():
    vals = [bubble(0, m2).value for m2 in (1e-3, 1e-2, 1e-1, 1.0)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_bubble_needs_positive_mass():
    with pytest.raises(ValueError):
        bubble(0, 0.0)
