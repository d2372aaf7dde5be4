"""Discrete torus geometry, the lattice Laplacian and scale bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class TorusLattice:
    """The torus Z^d / L^N Z^d with row-major site indexing.

    Parameters
    ----------
    d : int
        Dimension.
    L : int
        Block side, at least 2.
    N : int
        Number of scales. ``N = 0`` gives the one-site torus, on which all
        2d neighbours of the site are the site itself.
    """

    d: int
    L: int
    N: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        if self.L < 2:
            raise ValueError(f"block side must be >= 2, got {self.L}")
        if self.N < 0:
            raise ValueError(f"number of scales must be >= 0, got {self.N}")

    @property
    def period(self) -> int:
        return self.L**self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.period,) * self.d

    @property
    def sites(self) -> int:
        return self.period**self.d

    @property
    def degree(self) -> int:
        return 2 * self.d

    def coords(self, x) -> np.ndarray:
        """Coordinates of site index (or indices) ``x``, last axis = dimension."""
        x = np.asarray(x)
        if np.any((x < 0) | (x >= self.sites)):
            raise IndexError("site index out of range")
        return np.stack(np.unravel_index(x, self.shape), axis=-1)

    def index(self, c) -> np.ndarray | int:
        """Site index of coordinates ``c`` (reduced modulo the period)."""
        c = np.mod(np.asarray(c, dtype=np.int64), self.period)
        if c.shape[-1] != self.d:
            raise ValueError(f"expected {self.d} coordinates, got shape {c.shape}")
        idx = np.ravel_multi_index(tuple(np.moveaxis(c, -1, 0)), self.shape)
        return int(idx) if np.ndim(idx) == 0 else idx

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(M, 2d) array of neighbour indices, repeated on wrap-around."""
        c = self.coords(np.arange(self.sites))
        out = np.empty((self.sites, 2 * self.d), dtype=np.int64)
        for i in range(self.d):
            for k, s in enumerate((1, -1)):
                shifted = c.copy()
                shifted[:, i] += s
                out[:, 2 * i + k] = self.index(shifted)
        out.setflags(write=False)
        return out

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Sparse adjacency matrix with neighbour multiplicity."""
        M = self.sites
        rows = np.repeat(np.arange(M), 2 * self.d)
        A = sp.csr_matrix((np.ones(rows.size), (rows, self.neighbors.ravel())), shape=(M, M))
        A.sum_duplicates()
        return A

    def laplacian_matrix(self) -> np.ndarray:
        """Dense Laplacian, ``A - 2d I``."""
        return self.adjacency.toarray() - 2 * self.d * np.eye(self.sites)

    def displacement(self, a, b) -> np.ndarray:
        """Coordinate difference b - a reduced to the window (-P/2, P/2]^d."""
        P = self.period
        diff = np.mod(self.coords(b) - self.coords(a), P)
        return np.where(diff > P // 2, diff - P, diff)

    def distance(self, a, b) -> float:
        return float(np.sqrt(np.sum(self.displacement(a, b).astype(float) ** 2)))


def laplacian_apply(lat: TorusLattice, f) -> np.ndarray:
    """(Delta f)_x = sum over the 2d neighbours y of x of (f_y - f_x).

    ``f`` may carry trailing axes (e.g. spin components); the Laplacian acts
    on the leading site axis.
    """
    f = np.asarray(f)
    if f.shape[0] != lat.sites:
        raise ValueError(f"field has {f.shape[0]} sites, lattice has {lat.sites}")
    return f[lat.neighbors].sum(axis=1) - lat.degree * f


def _squared_distance(a, b, lat: TorusLattice | None) -> int:
    if lat is not None:
        if np.ndim(a) == 0 and np.ndim(b) == 0:
            diff = lat.displacement(a, b)
        else:
            diff = lat.displacement(lat.index(a), lat.index(b))
        return sum(int(v) ** 2 for v in diff)
    # Python integers: exact for displacements beyond 2^31
    return sum((int(y) - int(x)) ** 2 for x, y in zip(np.atleast_1d(a).tolist(), np.atleast_1d(b).tolist()))


def coalescence_scale(L: int, a, b, lat: TorusLattice | None = None) -> int:
    """floor(log_L(2|a-b|)), with the convention 0 when a = b.

    ``a`` and ``b`` are integer coordinate vectors in Z^d, or site indices
    when ``lat`` is given. The comparison ``L^j <= 2|a-b|`` is carried out
    in exact integer arithmetic on squares.
    """
    s = 4 * _squared_distance(a, b, lat)
    if s == 0:
        return 0
    j = 0
    while L ** (2 * (j + 1)) <= s:
        j += 1
    return j


def mass_scale(L: int, m2: float) -> float | int:
    """Largest j with sqrt(m2) * L^j <= 1; ``inf`` when m2 = 0."""
    if m2 < 0:
        raise ValueError(f"m2 must be nonnegative, got {m2}")
    if m2 == 0:
        return math.inf
    j = math.floor(-0.5 * math.log(m2) / math.log(L))
    # guard the floor against rounding in the logarithm
    while m2 * float(L) ** (2 * j) > 1:
        j -= 1
    while m2 * float(L) ** (2 * (j + 1)) <= 1:
        j += 1
    return j


@dataclass(frozen=True)
class ScaleGeometry:
    """Coalescence scale, mass scale and decay base for one observable pair."""

    j_ab: float | int
    j_m: float | int
    Omega: float = 2.0

    def __post_init__(self):
        if not self.Omega > 1:
            raise ValueError("Omega must exceed 1")

    @classmethod
    def from_points(cls, L: int, a, b, m2: float, Omega: float = 2.0, lat=None) -> "ScaleGeometry":
        return cls(coalescence_scale(L, a, b, lat), mass_scale(L, m2), Omega)

    @classmethod
    def star(cls, L: int, m2: float, Omega: float = 2.0) -> "ScaleGeometry":
        """Geometry with no coalescence, used for star networks and susceptibilities."""
        return cls(math.inf, mass_scale(L, m2), Omega)
