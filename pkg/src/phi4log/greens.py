"""Lattice Green functions, the random-walk representation and the bubble diagram."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .heat import continuum_log_heat_kernel, log_heat_kernel_times, log_ive
from .lattice import TorusLattice
from .mcstats import McEstimate, from_batches, run_batches, split_counts

# beyond this time the lattice kernel equals the Gaussian to ~1e-12 relative
_CONTINUUM_TIME = 1e12
_KILL_LOG_WEIGHT = 40.0


@dataclass(frozen=True)
class GreenTable:
    """Green function values at one mass.

    On a torus ``entries`` is the full symmetric matrix; on Z^d it is a vector
    of values at the displacements listed in ``points``.
    """

    m2: float
    entries: np.ndarray
    lattice: TorusLattice | None = None
    points: np.ndarray | None = None
    d: int | None = None

    @property
    def infinite(self) -> bool:
        return self.lattice is None

    def __call__(self, a, b=None) -> float:
        if not self.infinite:
            return float(self.entries[a, b])
        x = np.abs(np.asarray(a if b is None else np.asarray(b) - np.asarray(a)))
        x = np.sort(x)
        hit = np.flatnonzero(np.all(np.sort(np.abs(self.points), axis=1) == x, axis=1))
        if hit.size:
            return float(self.entries[hit[0]])
        return green_zd(self.d, self.m2, x)


def green_torus_exact(lat: TorusLattice, m2: float) -> GreenTable:
    """Dense inverse of (-Delta + m2) on the torus."""
    if not m2 > 0:
        raise ValueError("the torus Laplacian is singular; m2 must be positive")
    H = -lat.laplacian_matrix() + m2 * np.eye(lat.sites)
    G = np.linalg.inv(H)
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return GreenTable(m2, G, lattice=lat, d=lat.d)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gl(f, a: float, b: float, panels: int) -> float:
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    x = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half * _GL_NODES
    return float(np.sum(half * _GL_WEIGHTS * f(x)))


def _segment(f, a: float, b: float, epsrel: float, panels: int) -> float:
    # composite Gauss-Legendre at two levels, adaptive quadrature if they disagree
    coarse, fine = _gl(f, a, b, panels), _gl(f, a, b, 2 * panels)
    if abs(fine - coarse) <= 0.1 * epsrel * abs(fine):
        return fine
    return integrate.quad(lambda v: float(f(np.array(v))), a, b, epsabs=0.0, epsrel=epsrel, limit=2000)[0]


def time_integral(log_f, t0: float, t1: float, points=(), epsrel: float = 1e-11) -> float:
    """Integral of exp(log_f(t)) over [t0, t1]; ``log_f`` must accept arrays.

    The part below t = 1 is integrated in t, the rest in log t so that
    power-law tails spanning many decades are resolved. The log-time range
    is first scanned on a grid and trimmed to where the integrand is within
    exp(-50) of its maximum.
    """
    if t1 <= t0:
        return 0.0
    total = 0.0
    if t0 < 1.0:
        hi = min(1.0, t1)
        lin = lambda t: np.exp(log_f(np.maximum(t, 1e-300)))
        if np.max(log_f(np.linspace(max(t0, 1e-300), hi, 9))) > -700:
            total += _segment(lin, t0, hi, epsrel, 2)
    if t1 > 1.0:
        s0, s1 = math.log(max(t0, 1.0)), math.log(t1)
        g = lambda s: log_f(np.exp(s)) + s
        grid = np.linspace(s0, s1, 257)
        vals = np.nan_to_num(g(grid), nan=-np.inf)
        top = np.max(vals)
        if not np.isfinite(top):
            return total
        keep = np.flatnonzero(vals > top - 50.0)
        lo_i, hi_i = max(keep[0] - 1, 0), min(keep[-1] + 1, grid.size - 1)
        s0, s1 = grid[lo_i], grid[hi_i]
        pts = {math.log(p) for p in points if p > 0} | {float(grid[np.argmax(vals)])}
        edges = [s0, *sorted(v for v in pts if s0 < v < s1), s1]
        f = lambda s: np.exp(g(s))
        total += sum(_segment(f, a, b, epsrel, max(1, int(math.ceil(2 * (b - a)))))
                     for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return total


def _log_kernel(t, x, d: int):
    """log p_t(x), vectorised over t; t = 0 gives the delta function."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x)
    pos = np.maximum(t, 1e-300)
    out = log_heat_kernel_times(pos, x) if np.any(x) else d * log_ive(0.0, 2.0 * pos)
    return np.where(t > 0, out, 0.0 if not np.any(x) else -np.inf)


def _continuum_tail(d: int, m2: float, x, T: float) -> float:
    """Integral over t > T of the massless Gaussian kernel (used only when m2 = 0)."""
    c = float(np.sum(np.asarray(x, dtype=float) ** 2)) / 4.0
    a = d / 2.0 - 1.0
    if c == 0:
        return (4 * math.pi) ** (-d / 2) * T ** (-a) / a
    return (4 * math.pi) ** (-d / 2) * c ** (-a) * special.gamma(a) * special.gammainc(a, c / T)


def _check_domain(d: int, m2: float):
    if d < 1:
        raise ValueError("dimension must be positive")
    if m2 < 0:
        raise ValueError("m2 must be nonnegative")
    if m2 == 0 and d <= 2:
        raise ValueError(f"the massless Green function diverges in d = {d}")


def green_zd(d: int, m2: float, x, epsrel: float = 1e-11) -> float:
    """G_{0x}(m2) on Z^d from the heat-kernel time integral.

    Uses G = int_0^inf exp(-m2 t) p_t(x) dt with the Bessel-product kernel.
    """
    _check_domain(d, m2)
    x = np.sort(np.abs(np.asarray(x, dtype=np.int64).reshape(-1)))
    if x.size != d:
        raise ValueError(f"expected a {d}-vector, got {x.size} entries")
    r2 = float(np.sum(x.astype(float) ** 2))
    peak = max(r2 / (2 * d), 1.0)
    if m2 > 0:
        T = max(800.0 / m2, 4 * peak)
        tail = 0.0
    else:
        T = max(_CONTINUUM_TIME, 1e4 * r2)
        tail = _continuum_tail(d, m2, x, T)
    pts = [peak] + ([1.0 / m2] if m2 > 0 else [])
    return time_integral(lambda t: _log_kernel(t, x, d) - m2 * t, 0.0, T, pts, epsrel) + tail


def _graded_panels(h0: float, depth: int) -> np.ndarray:
    """Panel edges on [0, pi]: geometric toward 0 below h0, uniform above."""
    inner = h0 * 2.0 ** -np.arange(depth, 0, -1)
    outer = np.linspace(h0, math.pi, max(2, int(math.ceil(math.pi / h0)) + 1))
    return np.concatenate([[0.0], inner, outer])


def _gauss_nodes(edges: np.ndarray, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


def _fourier_level(d: int, m2: float, x: np.ndarray, n: int, depth: int) -> float:
    # the momentum along the last (largest) axis is integrated in closed form:
    # (1/pi) int_0^pi cos(k x) / (A - 2 cos k) dk = r^|x| / sqrt(A^2 - 4)
    xa, rest = x[-1], x[:-1]

    def closed_form(gap):
        disc = np.sqrt(gap * (gap + 4.0))
        return (2.0 / (gap + 2.0 + disc)) ** xa / disc

    if d == 1:
        return float(closed_form(np.float64(m2)))
    h0 = math.pi / max(4, 2 * int(rest.max()) + 2)
    nodes, weights = _gauss_nodes(_graded_panels(h0, depth), n)
    gap_rest, wgt, phase = np.zeros(()), np.ones(()), np.ones(())
    if d > 2:
        mesh = np.meshgrid(*([nodes] * (d - 2)), indexing="ij")
        wmesh = np.meshgrid(*([weights] * (d - 2)), indexing="ij")
        gap_rest = sum(4.0 * np.sin(0.5 * k) ** 2 for k in mesh)
        wgt = np.prod(wmesh, axis=0)
        phase = np.prod([np.cos(xi * k) for xi, k in zip(rest[1:], mesh)], axis=0)
    wp = wgt * phase
    total = 0.0
    for k0, w0 in zip(nodes, weights):
        gap = m2 + 4.0 * math.sin(0.5 * k0) ** 2 + gap_rest
        total += w0 * math.cos(rest[0] * k0) * float(np.sum(wp * closed_form(gap)))
    return total / math.pi ** (d - 1)


def green_zd_fourier(d: int, m2: float, x, method: str = "schwinger", n: int = 6, depth: int = 14,
                     tol: float = 1e-7, max_levels: int = 6) -> float:
    """G_{0x}(m2) on Z^d.

    Parameters
    ----------
    method : {"schwinger", "fourier"}
        ``"schwinger"`` integrates the heat kernel over time (default,
        relative accuracy ~1e-10). ``"fourier"`` integrates
        1/(lambda(k) + m2) by Gauss-Legendre product quadrature over the
        momentum torus, with one momentum done in closed form and panels
        graded geometrically toward k = 0. Each refinement level adds two
        grading levels and two nodes per panel; the result is returned once
        two successive levels agree to ``tol``.
    """
    _check_domain(d, m2)
    if method == "schwinger":
        return green_zd(d, m2, x)
    if method != "fourier":
        raise ValueError(f"unknown method {method!r}")
    x = np.sort(np.abs(np.asarray(x, dtype=np.int64).reshape(-1)))
    if x.size != d:
        raise ValueError(f"expected a {d}-vector, got {x.size} entries")
    prev = _fourier_level(d, m2, x, n, depth)
    for level in range(1, max_levels + 1):
        cur = _fourier_level(d, m2, x, n + 2 * level, depth + 2 * level)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise RuntimeError(f"Fourier quadrature did not reach tol={tol}; last change {abs(cur - prev):.2e}")


def green_zd_table(d: int, m2: float, points) -> GreenTable:
    pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
    vals = np.array([green_zd(d, m2, p) for p in pts])
    return GreenTable(m2, vals, points=pts, d=d)


def neumann_green(lat: TorusLattice, V, n_max: int = 10_000, tail_tol: float = 1e-12,
                  return_terms: bool = False):
    """Walk expansion sum_n (U^{-1} J)^n U^{-1} of (-Delta + V)^{-1}, U = 2d + V.

    The n-th term sums nearest-neighbour n-step paths. Terms are added until
    the tail bound rho^(n+1) / (1 - rho) * max|1/U| in the max-row-sum norm
    drops below ``tail_tol``, with rho = max_x 2d / |2d + v_x|.
    """
    V = np.broadcast_to(np.asarray(V), (lat.sites,))
    if np.any(np.real(V) <= 0):
        raise ValueError("the walk expansion needs Re(v_x) > 0")
    U = lat.degree + V
    rho = float(np.max(lat.degree / np.abs(U)))
    if rho >= 1:
        raise ArithmeticError("walk expansion does not converge (rho >= 1)")
    dtype = np.result_type(V.dtype, float)
    J = lat.adjacency.toarray().astype(dtype)
    K = J / U[:, None]
    term = np.diag(1.0 / U).astype(dtype)
    total = term.copy()
    scale = float(np.max(1.0 / np.abs(U)))
    n = 0
    while rho ** (n + 1) / (1 - rho) * scale > tail_tol:
        if n >= n_max:
            need = math.ceil(math.log(tail_tol * (1 - rho) / scale) / math.log(rho))
            raise ArithmeticError(f"tail bound above {tail_tol} after {n_max} terms; need about {need}")
        term = K @ term
        total += term
        n += 1
    return (total, n + 1) if return_terms else total


def walk_green_mc(lat: TorusLattice, V, a: int, b: int, samples: int, rng_seed: int,
                  n_batches: int = 16, threads: int = 1) -> McEstimate:
    """Monte Carlo estimate of int_0^inf E_a[exp(-sum_x v_x L_T(x)) 1(X_T = b)] dT.

    Walks jump at rate 2d to uniform neighbours. Each visit to b with
    accumulated weight exp(-W) and holding time s contributes
    exp(-W) (1 - exp(-v_b s)) / v_b, the exact time integral over the visit.
    Walks are dropped once W exceeds 40, which biases the estimate by less
    than exp(-40) relative.
    """
    V = np.broadcast_to(np.asarray(V, dtype=float), (lat.sites,)).copy()
    if np.any(V <= 0):
        raise ValueError("potential must be positive")
    counts = split_counts(samples, n_batches)
    nbr = lat.neighbors
    deg = lat.degree

    def task(rng, count):
        pos = np.full(count, a, dtype=np.int64)
        W = np.zeros(count)
        acc = np.zeros(count)
        live = np.arange(count)
        while live.size:
            p = pos[live]
            s = rng.exponential(1.0 / deg, live.size)
            v = V[p]
            hit = p == b
            acc[live[hit]] += np.exp(-W[live[hit]]) * (-np.expm1(-v[hit] * s[hit])) / v[hit]
            W[live] += v * s
            pos[live] = nbr[p, rng.integers(0, deg, live.size)]
            live = live[W[live] < _KILL_LOG_WEIGHT]
        return acc.mean()

    means = run_batches(task, counts, rng_seed, threads)
    return from_batches(means, counts, rng_seed)


@dataclass(frozen=True)
class BubbleResult:
    """The bubble diagram (n+8) sum_x G_{0x}(m2)^2.

    ``value`` is the full lattice sum. When a radius is requested,
    ``partial`` is the sum over the box |x|_inf <= radius, ``tail`` the
    remainder ``value - partial``, and ``decay`` the fitted constants
    (C, c) of G_{0x} <= C exp(-c sqrt(m2) |x|) on the box shell.
    """

    n: int
    m2: float
    value: float
    radius: int | None = None
    partial: float | None = None
    tail: float | None = None
    decay: tuple | None = None
    flagged: bool = False


def bubble_constant(n: int) -> float:
    """(n+8) / (16 pi^2), the coefficient of log(1/m2) in the bubble diagram on Z^4."""
    return (n + 8) / (16 * math.pi**2)


def bubble_sum(m2: float, d: int = 4) -> float:
    """sum_x G_{0x}(m2)^2 = int_0^inf u p_u(0) exp(-m2 u) du."""
    if not m2 > 0:
        raise ValueError("bubble requires m2 > 0")
    T = 800.0 / m2
    return time_integral(lambda u: np.log(u) + _log_kernel(u, 0, d) - m2 * u, 0.0, T, [1.0 / m2])


def _symmetry_classes(radius: int, d: int):
    for x in itertools.combinations_with_replacement(range(radius + 1), d):
        nz = sum(1 for v in x if v)
        perms = math.factorial(d)
        for v in set(x):
            perms //= math.factorial(x.count(v))
        yield np.array(x), perms * 2**nz


def bubble(n: int, m2: float, radius: int | None = None, d: int = 4, rel_tol: float = 1e-3) -> BubbleResult:
    """Bubble diagram B = (n+8) sum_x G_{0x}(m2)^2 on Z^d."""
    if n < 0:
        raise ValueError("component count must be nonnegative")
    value = (n + 8) * bubble_sum(m2, d)
    if radius is None:
        return BubbleResult(n, m2, value)
    partial = 0.0
    shell = []
    for x, mult in _symmetry_classes(radius, d):
        g = green_zd(d, m2, x)
        partial += mult * g * g
        if x.max() == radius:
            shell.append((float(np.linalg.norm(x)), g))
    partial *= n + 8
    tail = value - partial
    decay = None
    if len(shell) >= 2 and m2 > 0:
        r, g = np.array(shell).T
        slope, icpt = np.polyfit(r, np.log(g), 1)
        decay = (float(math.exp(icpt)), float(-slope / math.sqrt(m2)))
    return BubbleResult(n, m2, value, radius, partial, tail, decay, bool(tail > rel_tol * value))


def green_continuum(d: int, m2: float, x) -> float:
    """Massless continuum Green function, for reference in asymptotic checks."""
    r2 = float(np.sum(np.asarray(x, dtype=float) ** 2))
    if m2 != 0 or d < 3 or r2 == 0:
        raise ValueError("only the massless d >= 3 continuum kernel at x != 0 is provided")
    return special.gamma(d / 2 - 1) / (4 * math.pi ** (d / 2) * r2 ** (d / 2 - 1))


__all__ = [
    "BubbleResult",
    "GreenTable",
    "bubble",
    "bubble_sum",
    "continuum_log_heat_kernel",
    "green_continuum",
    "green_torus_exact",
    "green_zd",
    "green_zd_fourier",
    "green_zd_table",
    "neumann_green",
    "time_integral",
    "walk_green_mc",
]
