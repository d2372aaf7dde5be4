"""Gaussian moments as permutation sums, and an exact skeleton-sum oracle
for walk networks on tori with at most three sites."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from ..lattice import TorusLattice

MAX_WICK_ORDER = 8
MAX_ORACLE_SITES = 3


def wick_permanent(C, A, B) -> float:
    """Sum over permutations s of prod_i C[A[i], B[s(i)]].

    This is the Gaussian expectation of prod_i phi_{A_i} . bar-phi_{B_i}
    for a complex field with covariance ``C``.
    """
    C = np.asarray(C)
    A, B = list(A), list(B)
    if len(A) != len(B):
        raise ValueError("need as many sinks as sources")
    p = len(A)
    if p > MAX_WICK_ORDER:
        raise ValueError(f"permutation sum limited to p <= {MAX_WICK_ORDER}")
    if p == 0:
        return 1.0
    sub = C[np.ix_(A, B)]
    rows = np.arange(p)
    total = 0.0
    for perm in itertools.permutations(range(p)):
        total += np.prod(sub[rows, list(perm)])
    return float(total)


def _holding_integral(k: int, rate: float, g: float) -> float:
    # int_0^inf l^(k-1)/(k-1)! exp(-rate l - g l^2) dl, the combined holding
    # time of k visits to one site
    if k == 0:
        return 1.0
    if g == 0:
        return rate ** (-k)
    # log-concave integrand; centre the quadrature window on its peak
    peak = (-rate + math.sqrt(rate * rate + 8 * g * (k - 1))) / (4 * g) if k > 1 else 0.0
    log_norm = -math.lgamma(k)

    def log_f(x):
        with np.errstate(divide="ignore"):
            return (k - 1) * np.log(x) + log_norm - rate * x - g * x * x

    ref = float(log_f(peak)) if peak > 0 else log_norm
    width = 1.0 / math.sqrt(rate * rate / max(k - 1, 1) + 2 * g) * math.sqrt(max(k - 1, 1))
    hi = peak + 60 * width + 60 / rate
    val, _ = integrate.quad(lambda x: math.exp(log_f(x) - ref) if x > 0 else (1.0 if k == 1 else 0.0),
                            0.0, hi, points=[peak] if 0 < peak < hi else None, epsabs=0, epsrel=1e-13, limit=200)
    return val * math.exp(ref)


@lru_cache(maxsize=64)
def _holding_table(kmax: int, rate: float, g: float) -> np.ndarray:
    return np.array([_holding_integral(k, rate, g) for k in range(kmax + 1)])


def skeleton_tail_bound(n_max: int, p: int, d: int, nu: float) -> float:
    """Upper bound on the contribution of skeletons with more than ``n_max`` jumps.

    A skeleton with n jumps in total, spread over p walks, weighs at most
    r^n (2d + nu)^(-p) with r = 2d / (2d + nu), and there are
    C(n + p - 1, p - 1) ways to split n among the walks.
    """
    if nu <= 0:
        return math.inf
    r = 2 * d / (2 * d + nu)
    total, n = 0.0, n_max + 1
    while True:
        term = math.comb(n + p - 1, p - 1) * r**n
        total += term
        if term < 1e-18 * total and n > n_max + 10 * p:
            break
        n += 1
    return math.factorial(p) * total * (2 * d + nu) ** (-p)


def required_jumps(p: int, d: int, nu: float, tol: float) -> int:
    n = 8
    while skeleton_tail_bound(n, p, d, nu) > tol:
        n = int(n * 1.25) + 1
        if n > 100_000:
            raise ArithmeticError("no feasible truncation")
    return n


def _shift(F: np.ndarray, axis: int) -> np.ndarray:
    # raise the visit count at one site by one, dropping the overflow
    out = np.zeros_like(F)
    src = [slice(None)] * F.ndim
    dst = [slice(None)] * F.ndim
    src[axis] = slice(0, -1)
    dst[axis] = slice(1, None)
    out[tuple(dst)] = F[tuple(src)]
    return out


def skeleton_sum(lat: TorusLattice, a: int, b: int, p: int, n_max: int, J) -> float:
    """Sum over p-tuples of jump skeletons from a to b of prod_x J[K_x].

    ``K_x`` is the combined number of visits to x (initial site or jump
    target) over all walks, and neighbour multiplicities on small tori are
    included. Walks are laid out one after the other and every step adds
    exactly one visit, so the count at the last site is implied by the step
    number; the frontier only tracks the counts at the other M - 1 sites.
    """
    M = lat.sites
    A = lat.adjacency.toarray()
    kmax = n_max + p
    J = np.asarray(J, dtype=float)
    free = M - 1
    shape = (kmax + 1,) * free
    grids = np.indices(shape) if free else np.zeros((0,), dtype=int)
    base = np.ones(shape)
    used = np.zeros(shape, dtype=int)
    for axis in range(free):
        base = base * J[grids[axis]]
        used = used + grids[axis]

    def bump(F, x):
        return _shift(F, x) if x < free else F

    start = np.zeros(shape)
    start[tuple(int(x == a) for x in range(free))] = 1.0
    frontier = {(0, a): start}
    total = 0.0
    for visits in range(1, kmax + 1):
        # every frontier entry now carries ``visits`` visits in total
        rest = visits - used
        weight = np.where(rest >= 0, base * J[np.clip(rest, 0, kmax)], 0.0)
        done = frontier.get((p - 1, b))
        if done is not None:
            total += float(np.sum(done * weight))
        if visits == kmax:
            break
        nxt: dict = {}
        for (w, x), F in frontier.items():
            if x == b and w < p - 1:
                key = (w + 1, a)
                nxt[key] = nxt.get(key, 0) + bump(F, a)
            for y in range(M):
                if A[x, y]:
                    key = (w, y)
                    nxt[key] = nxt.get(key, 0) + A[x, y] * bump(F, y)
        frontier = {k: v for k, v in nxt.items() if np.any(v)}
        if not frontier:
            break
    return total


def wsaw_tiny_oracle(lat: TorusLattice, g: float, nu: float, a: int, b: int, p: int,
                     n_max: int | None = None, tol: float = 1e-10) -> float:
    """Exact p-watermelon p! int E_a[exp(-g I_p) 1(X = b)] exp(-nu |T|) dT.

    Conditioning on the jump skeletons, the holding times at a site add up
    to its local time, so the integral factorises over sites into the
    one-dimensional integrals of ``_holding_integral``. Skeletons with more
    than ``n_max`` jumps in total are dropped; the dropped weight is bounded
    by ``skeleton_tail_bound`` and must not exceed ``tol``.
    """
    if lat.sites > MAX_ORACLE_SITES:
        raise ValueError(f"oracle limited to {MAX_ORACLE_SITES} sites, got {lat.sites}")
    if g < 0:
        raise ValueError("g must be nonnegative")
    if p < 1:
        raise ValueError("need at least one walk")
    if nu <= 0:
        raise ValueError("the truncation bound needs nu > 0")
    d = lat.d
    if n_max is None:
        n_max = required_jumps(p, d, nu, tol)
    tail = skeleton_tail_bound(n_max, p, d, nu)
    if tail > tol:
        need = required_jumps(p, d, nu, tol)
        raise ArithmeticError(f"tail bound {tail:.3g} exceeds tol {tol:.3g}; need n_max >= {need}")
    J = _holding_table(n_max + p, float(lat.degree + nu), float(g))
    return math.factorial(p) * skeleton_sum(lat, a, b, p, n_max, J)
