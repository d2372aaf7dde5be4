"""Heat-slab scale decomposition of the lattice Green function on Z^d.

Slab j is C_j = int_{t_{j-1}}^{t_j} exp(t Delta) exp(-m2 t) dt with
t_j = L^(2j) and t_0 = 0. Per-scale scalars are computed as exact
one-dimensional time integrals in infinite volume:

* C_{j;00} from the return probability p_t(0);
* C_j^(1) = sum_x C_{j;0x} = int exp(-m2 t) dt in closed form;
* w_j^(2) = sum_x w_{j;0x}^2 = int_0^{2 t_j} F(u) l_{t_j}(u) du with
  F(u) = p_u(0) exp(-m2 u) and the tent l_T(u) = min(u, 2T - u), which
  follows from the semigroup property.

Increments of w^(2) are assembled from nonnegative pieces, never by
subtracting two large numbers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .greens import _check_domain, _log_kernel, time_integral

CACHE_VERSION = 1
# lattice kernel equals the Gaussian to ~1e-12 relative beyond this time
_CONTINUUM_TIME = 1e12
# exp(-800) underflows: slabs beyond m2 t = 800 vanish
_MASS_CUTOFF = 800.0
SUPPORTED_FUNCTIONALS = ("nu_w1", "w2", "nu_w2", "wp_ab")


def _slab_w2_increment(logF, T: float, Tp: float, cap: float = math.inf) -> float:
    """w^(2)_{T'} - w^(2)_T as a sum of nonnegative integrals (T' >= 2T).

    ``cap`` truncates the integrals where a mass term has killed the integrand.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        pieces = [
            (lambda u: logF(u) + np.log(2.0 * np.maximum(u - T, 0.0)), T, 2 * T),
            (lambda u: logF(u) + np.log(u), 2 * T, Tp),
            (lambda u: logF(u) + np.log(np.maximum(2 * Tp - u, 0.0)), Tp, 2 * Tp),
        ]
        return sum(time_integral(f, lo, min(hi, cap)) for f, lo, hi in pieces if lo < min(hi, cap))


def _c1(m2: float, t0: float, t1: float) -> float:
    if m2 == 0:
        return t1 - t0
    return (math.exp(-m2 * t0) - math.exp(-m2 * t1)) / m2 if m2 * t0 < 745 else 0.0


def slab_symbol(j: int, k, L: int, m2: float) -> np.ndarray:
    """Fourier symbol of slab j at momenta ``k`` (last axis = dimension)."""
    k = np.asarray(k, dtype=float)
    lam = np.sum(2.0 * (1.0 - np.cos(k)), axis=-1) + m2
    t0 = 0.0 if j == 1 else float(L) ** (2 * (j - 1))
    t1 = float(L) ** (2 * j)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-t0 * lam) * -np.expm1(-(t1 - t0) * lam) / lam
    return np.where(lam == 0, t1 - t0, out)


@dataclass(frozen=True)
class StepScalars:
    """Dimensionless inputs of one renormalisation step j -> j+1.

    ``c00_hat`` is L^(2j) C_{j+1;00}; ``a0`` and ``a1`` are L^(-2j) w_j^(1)
    and L^(-2j) w_{j+1}^(1); ``dw2`` is w_{j+1}^(2) - w_j^(2) (so that
    beta_j = (n+8) dw2); ``w2_0``/``w2_1`` are w_j^(2), w_{j+1}^(2);
    ``c00`` is the unscaled C_{j+1;00} (may underflow deep in the flow).
    """

    j: int
    c00_hat: float
    a0: float
    a1: float
    dw2: float
    w2_0: float
    w2_1: float
    c00: float
    c1: float


@dataclass(frozen=True)
class Decomposition:
    """Per-scale heat slabs and moments for scales 1..J.

    Arrays are indexed by scale; index 0 holds w_0 = 0 (and 0 for slabs).
    ``radii`` lists axis displacements |x| at which ``slab_table[j, i]``
    stores C_{j;0x}. ``cutoff_flag`` is set when the table cutoff is below
    L^J / 2.
    """

    d: int
    L: int
    m2: float
    J: int
    cutoff: int
    t: np.ndarray
    c00: np.ndarray
    c1: np.ndarray
    w1: np.ndarray
    dw2: np.ndarray
    w2: np.ndarray
    radii: np.ndarray
    slab_table: np.ndarray
    cutoff_flag: bool = False
    moment_tail: float = 0.0
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    # -- geometry -----------------------------------------------------------
    def time(self, j: int) -> float:
        return 0.0 if j == 0 else float(self.L) ** (2 * j)

    def slab_at(self, j: int, x) -> float:
        """C_{j;0x} at an arbitrary displacement, by direct time integration."""
        x = tuple(sorted(abs(int(v)) for v in np.asarray(x).reshape(-1)))
        if _beyond_float(x):
            return 0.0
        key = ("slab", j, x)
        if key not in self._memo:
            self._memo[key] = _slab_value(self.d, self.L, self.m2, j, x)
        return self._memo[key]

    def w_at(self, j: int, x) -> float:
        """w_{j;0x} = sum_{i <= j} C_{i;0x}; scales beyond J use the massless
        continuum kernel (m2 = 0) or vanish (m2 > 0)."""
        x = tuple(sorted(abs(int(v)) for v in np.asarray(x).reshape(-1)))
        if _beyond_float(x):
            return 0.0
        if j <= self.J:
            return float(sum(self.slab_at(i, x) for i in range(1, j + 1)))
        self._require_extension(j)
        base = self.w_at(self.J, x)
        if self.m2 > 0:
            return base
        r2 = float(sum(v * v for v in x))
        T0, T1 = self.time(self.J), float(self.L) ** (2 * j) if j < 500 else math.inf
        return base + _continuum_slab(self.d, r2, T0, T1)

    # -- per-step inputs ----------------------------------------------------
    @property
    def continuum_ok(self) -> bool:
        if self.m2 > 0:
            return self.m2 * self.time(self.J) >= _MASS_CUTOFF
        return self.d == 4 and self.time(self.J) >= _CONTINUUM_TIME

    def covers(self, j: int) -> bool:
        """True when step j -> j+1 is available."""
        return j + 1 <= self.J or self.continuum_ok

    def _require_extension(self, j: int):
        if not self.continuum_ok:
            raise ValueError(
                f"decomposition has J={self.J}; scale {j} needs either a longer decomposition "
                "or one long enough for the continuum/massive extension"
            )

    def step(self, j: int) -> StepScalars:
        """Inputs for the step j -> j+1 (j >= 0)."""
        L2 = float(self.L) ** 2
        if j + 1 <= self.J:
            s = float(self.L) ** (-2 * j)
            return StepScalars(
                j, self.c00[j + 1] / s, self.w1[j] * s, self.w1[j + 1] * s,
                self.dw2[j + 1], self.w2[j], self.w2[j + 1], self.c00[j + 1], self.c1[j + 1],
            )
        self._require_extension(j)
        log_s = -2.0 * j * math.log(self.L)
        if self.m2 > 0:
            a = math.exp(math.log(self.w1[self.J]) + log_s) if self.w1[self.J] > 0 else 0.0
            return StepScalars(j, 0.0, a, a, 0.0, self.w2[self.J], self.w2[self.J], 0.0, 0.0)
        # massless continuum: scale-invariant slabs
        c_hat = (1.0 - 1.0 / L2) / (16 * math.pi**2)
        dw2 = 2.0 * math.log(self.L) / (16 * math.pi**2)
        w2_0 = self.w2[self.J] + (j - self.J) * dw2
        c00 = math.exp(math.log(c_hat) + log_s)
        # w^(1)_j = t_j exactly at m2 = 0
        c1 = (L2 - 1.0) * math.exp(-log_s) if -log_s < 700 else math.inf
        return StepScalars(j, c_hat, 1.0, L2, dw2, w2_0, w2_0 + dw2, c00, c1)

    def beta(self, n: int, j: int) -> float:
        return beta_j(self, n, 0.0, 0.0, j)

    # -- cache --------------------------------------------------------------
    def key(self) -> str:
        return cache_key(self.d, self.L, self.m2, self.J, self.cutoff)

    def save(self, path) -> None:
        arrays = {k: getattr(self, k) for k in ("t", "c00", "c1", "w1", "dw2", "w2", "radii", "slab_table")}
        meta = dict(version=CACHE_VERSION, d=self.d, L=self.L, m2=self.m2, J=self.J, cutoff=self.cutoff,
                    cutoff_flag=self.cutoff_flag, moment_tail=self.moment_tail)
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path) -> "Decomposition":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.pop("version") != CACHE_VERSION:
                raise ValueError(f"cache file {path} has an incompatible version")
            arrays = {k: z[k] for k in z.files if k != "meta"}
        return cls(**meta, **arrays)


def _beyond_float(x) -> bool:
    # |x|^2 above 1e300: every kernel value is below 1e-300, i.e. zero in doubles
    return sum(v * v for v in x) > 10**300


def _slab_value(d: int, L: int, m2: float, j: int, x: tuple) -> float:
    xa = np.asarray(x)
    t0 = 0.0 if j == 1 else float(L) ** (2 * (j - 1))
    t1 = float(L) ** (2 * j)
    if m2 > 0 and m2 * t0 > _MASS_CUTOFF:
        return 0.0
    if m2 > 0:
        t1 = min(t1, max(_MASS_CUTOFF / m2, t0))
    r2 = float(np.sum(xa.astype(float) ** 2))
    peak = max(r2 / (2 * d), 1.0)
    # p_t(x) is unimodal in t, so its slab maximum sits at the clipped peak
    t_star = min(max(peak, t0, 1e-300), t1)
    if _log_kernel(t_star, xa, d) - m2 * t_star + math.log(t1 - t0) < -700:
        return 0.0
    return time_integral(lambda t: _log_kernel(t, xa, d) - m2 * t, t0, t1, [peak])


def _continuum_slab(d: int, r2: float, T0: float, T1: float) -> float:
    # int_{T0}^{T1} (4 pi t)^(-2) exp(-r2/4t) dt in d = 4
    if r2 == 0:
        return (1.0 / T0 - (0.0 if math.isinf(T1) else 1.0 / T1)) / (16 * math.pi**2)
    c = r2 / 4.0
    hi = 1.0 if math.isinf(T1) else math.exp(-c / T1)
    return (hi - math.exp(-c / T0)) / (16 * math.pi**2 * c)


def cache_key(d: int, L: int, m2: float, J: int, cutoff: int) -> str:
    raw = json.dumps([CACHE_VERSION, d, L, float(m2).hex(), J, cutoff])
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def _default_radii(L: int, J: int, cutoff: int) -> np.ndarray:
    powers = [L**k for k in range(J + 1) if L**k <= cutoff]
    return np.unique(np.array([0, 1, 2, *powers, cutoff], dtype=np.int64))


@lru_cache(maxsize=256)
def _scale_scalars(d: int, L: int, m2: float, j: int) -> tuple[float, float, float]:
    """(C_{j;00}, C_j^(1), w_j^(2) - w_{j-1}^(2)) for one scale."""
    T = 0.0 if j == 1 else float(L) ** (2 * (j - 1))
    Tp = float(L) ** (2 * j)
    if m2 > 0 and m2 * T > _MASS_CUTOFF:
        return 0.0, 0.0, 0.0
    logF = lambda u: _log_kernel(u, 0, d) - m2 * u
    cap = math.inf if m2 == 0 else max(_MASS_CUTOFF / m2, 2 * T)
    c00 = time_integral(logF, T, min(Tp, cap))
    return c00, _c1(m2, T, Tp), _slab_w2_increment(logF, T, Tp, cap)


def decompose(d: int, L: int, m2: float, J: int, cutoff: int | None = None, radii=None,
              cache_dir: str | os.PathLike | None = None) -> Decomposition:
    """Build the heat-slab decomposition for scales 1..J.

    Parameters
    ----------
    cutoff : int, optional
        Largest axis displacement stored in the slab tables; defaults to
        6 L^J (capped at 2^40 to keep the table finite).
    radii : array of int, optional
        Axis displacements to tabulate (default: 0..8 plus a geometric grid).
    cache_dir : path, optional
        Directory of ``.npz`` cache files keyed by (d, L, m2, J, cutoff).
    """
    if J < 1:
        raise ValueError("J must be at least 1")
    if L < 2:
        raise ValueError("L must be at least 2")
    _check_domain(d, m2)
    if m2 == 0 and d <= 2:
        raise ValueError("massless decomposition needs d >= 3")
    if cutoff is None:
        cutoff = int(min(6 * L**J, 2**40))
    path = None
    if cache_dir is not None and radii is None:
        path = os.path.join(os.fspath(cache_dir), f"decomp-{cache_key(d, L, m2, J, cutoff)}.npz")
        if os.path.exists(path):
            return Decomposition.load(path)
    radii = _default_radii(L, J, cutoff) if radii is None else np.asarray(radii, dtype=np.int64)

    t = np.array([0.0] + [float(L) ** (2 * j) for j in range(1, J + 1)])
    c00, c1, dw2 = (np.zeros(J + 1) for _ in range(3))
    for j in range(1, J + 1):
        c00[j], c1[j], dw2[j] = _scale_scalars(d, L, float(m2), j)
    w1 = np.cumsum(c1)
    w2 = np.cumsum(dw2)
    table = np.zeros((J + 1, radii.size))
    for j in range(1, J + 1):
        for i, r in enumerate(radii):
            x = (int(r),) + (0,) * (d - 1)
            table[j, i] = _slab_value(d, L, float(m2), j, x)
    dec = Decomposition(d, L, float(m2), J, int(cutoff), t, c00, c1, w1, dw2, w2, radii, table,
                        cutoff_flag=bool(cutoff < L**J / 2))
    for a in ("t", "c00", "c1", "w1", "dw2", "w2", "radii", "slab_table"):
        getattr(dec, a).setflags(write=False)
    if path is not None:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        dec.save(path)
    return dec


# -- perturbative coefficients ---------------------------------------------

def nu_plus(nu: float, g: float, n: int, c00: float) -> float:
    return nu + g * (n + 2) * c00


def delta_nu_w1(nu: float, g: float, n: int, c00: float, w1: float, c1: float) -> float:
    """delta[nu w^(1)] = nu^+ (w^(1) + C^(1)) - nu w^(1)."""
    return nu_plus(nu, g, n, c00) * (w1 + c1) - nu * w1


def beta_j(dec: Decomposition, n: int, nu: float, g: float, j: int) -> float:
    """beta_j = (n+8) [w_{j+1}^(2) - w_j^(2)]; independent of nu and g."""
    if not dec.covers(j):
        raise ValueError(f"scale j+1 = {j + 1} exceeds the decomposition (J = {dec.J})")
    return (n + 8) * dec.step(j).dw2


def delta_op(dec: Decomposition, n: int, g: float, nu: float, j: int, f: str,
             a=None, b=None, p: int | None = None, j_ab: int | None = None) -> float:
    """Shifted-minus-unshifted difference f(nu^+, w + C_{j+1}) - f(nu, w_j).

    ``f`` is one of ``"nu_w1"``, ``"w2"``, ``"nu_w2"`` or ``"wp_ab"``.
    For ``"wp_ab"`` the displacement is b - a (coordinate vectors) and the
    increment is forced to 0 below the coalescence scale; at j = j_ab it is
    w_{j_ab+1;ab}^p, so the sub-coalescence part of w_{ab} is carried by
    the first nonzero step.
    """
    if f not in SUPPORTED_FUNCTIONALS:
        raise ValueError(f"unsupported functional {f!r}; choose from {SUPPORTED_FUNCTIONALS}")
    s = dec.step(j)
    if f == "w2":
        return s.dw2
    if f == "nu_w1":
        # in scaled variables nu_hat = L^(2j) nu, so no huge or tiny factors appear
        nu_hat = nu * float(dec.L) ** (2 * j)
        return (nu_hat + g * (n + 2) * s.c00_hat) * s.a1 - nu_hat * s.a0
    if f == "nu_w2":
        return nu_plus(nu, g, n, s.c00) * s.w2_1 - nu * s.w2_0
    if p is None or a is None or b is None:
        raise ValueError("wp_ab needs a, b and p")
    from .lattice import coalescence_scale

    x = np.asarray(b) - np.asarray(a)
    jab = coalescence_scale(dec.L, np.zeros_like(x), x) if j_ab is None else j_ab
    if j < jab:
        return 0.0
    hi = dec.w_at(j + 1, x) ** p
    return hi if j == jab else hi - dec.w_at(j, x) ** p
