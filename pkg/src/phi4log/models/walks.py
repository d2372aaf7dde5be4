"""Continuous-time walks, their local times, and Monte Carlo estimates of
watermelon and star networks of weakly self-avoiding walks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..lattice import TorusLattice
from ..mcstats import McEstimate, from_batches, run_batches, split_counts


@dataclass(frozen=True)
class WalkPath:
    """A walk that visits ``sites[i]`` for ``holding[i]`` time units."""

    sites: np.ndarray
    holding: np.ndarray

    def __post_init__(self):
        if len(self.sites) != len(self.holding):
            raise ValueError("one holding time per visited site")
        if len(self.sites) == 0:
            raise ValueError("a path visits at least one site")
        if np.any(np.asarray(self.holding) < 0):
            raise ValueError("holding times must be nonnegative")

    @property
    def T(self) -> float:
        return float(np.sum(self.holding))

    def local_time(self, M: int) -> np.ndarray:
        return np.bincount(np.asarray(self.sites), weights=np.asarray(self.holding, dtype=float), minlength=M)

    def is_nearest_neighbour(self, lat: TorusLattice) -> bool:
        s = np.asarray(self.sites)
        return bool(np.all(np.any(lat.neighbors[s[:-1]] == s[1:, None], axis=1)))


def intersection_local_time(paths, M: int | None = None) -> float:
    """sum_x (sum_k L^k(x))^2 for walks ``paths`` on a lattice with M sites."""
    paths = list(paths)
    if M is None:
        M = 1 + max(int(np.max(p.sites)) for p in paths)
    L = sum(p.local_time(M) for p in paths)
    return float(np.sum(L * L))


def simulate_local_times(lat: TorusLattice, start: int, T: np.ndarray, rng: np.random.Generator):
    """Run independent rate-2d walks from ``start`` for times ``T``.

    Returns the (S, M) array of local times and the final positions.
    """
    T = np.asarray(T, dtype=float)
    S = T.size
    nbr = lat.neighbors
    deg = lat.degree
    Lt = np.zeros((S, lat.sites))
    pos = np.full(S, start, dtype=np.int64)
    left = T.copy()
    live = np.arange(S)
    while live.size:
        s = rng.exponential(1.0 / deg, live.size)
        stay = np.minimum(s, left[live])
        np.add.at(Lt, (live, pos[live]), stay)
        left[live] -= stay
        moving = s < left[live] + stay
        # a walk whose remaining time ran out stops where it is
        moving &= left[live] > 0
        mv = live[moving]
        pos[mv] = nbr[pos[mv], rng.integers(0, deg, mv.size)]
        live = mv
    return Lt, pos


def _network_task(lat, g, nu, a, b, p):
    def task(rng, count):
        # T_k ~ Exp(nu/2) proposals, reweighted by exp(-nu T) / density
        T = rng.exponential(2.0 / nu, (p, count))
        log_w = p * math.log(2.0 / nu) - 0.5 * nu * T.sum(axis=0)
        total = np.zeros((count, lat.sites))
        single = np.zeros(count)
        hit = np.ones(count, dtype=bool)
        for k in range(p):
            Lk, end = simulate_local_times(lat, a, T[k], rng)
            total += Lk
            single += np.sum(Lk * Lk, axis=1)
            if b is not None:
                hit &= end == b
        I = np.sum(total * total, axis=1)
        if np.any(I < single * (1 - 1e-12)):
            raise AssertionError("intersection local time below the sum of single-walk terms")
        vals = np.where(hit, math.factorial(p) * np.exp(log_w - g * I), 0.0)
        return vals.mean()
    return task


def _check_args(g, nu, p, samples):
    if samples <= 0:
        raise ValueError("samples must be positive")
    if p < 1:
        raise ValueError("need at least one walk")
    if g < 0:
        raise ValueError("g must be nonnegative")
    if nu <= 0:
        raise ValueError("the exponential time proposal needs nu > 0")


def watermelon_mc(lat: TorusLattice, g: float, nu: float, a: int, b: int, p: int, samples: int,
                  seed: int, n_batches: int = 16, threads: int = 1) -> McEstimate:
    """Estimate p! int E_a[exp(-g I_p) 1(all walks end at b)] exp(-nu |T|) dT.

    Each of the p walk lengths is drawn from an exponential law of rate
    nu/2 and reweighted, which keeps the variance finite for nu > 0. Every
    sample is checked against I_p >= sum_k I_1(k).
    """
    _check_args(g, nu, p, samples)
    counts = split_counts(samples, n_batches)
    means = run_batches(_network_task(lat, g, nu, a, b, p), counts, seed, threads)
    return from_batches(means, counts, seed)


def star_mc(lat: TorusLattice, g: float, nu: float, p: int, samples: int, seed: int,
            a: int = 0, n_batches: int = 16, threads: int = 1) -> McEstimate:
    """Estimate p! int E_a[exp(-g I_p)] exp(-nu |T|) dT, endpoints free."""
    _check_args(g, nu, p, samples)
    counts = split_counts(samples, n_batches)
    means = run_batches(_network_task(lat, g, nu, a, None, p), counts, seed, threads)
    return from_batches(means, counts, seed)
