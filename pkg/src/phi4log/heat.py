"""Lattice heat kernel on Z^d in log space.

The continuous-time simple random walk with jump rate 2d has transition
kernel ``p_t(x) = prod_i exp(-2t) I_{|x_i|}(2t)``. Scipy's scaled Bessel
function is exact in the bulk of parameter space but returns nan or
underflows at extreme order or argument, so those regions fall back to
asymptotic expansions evaluated in log space.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

# above this argument the asymptotic expansions are used everywhere, so the
# kernel is a smooth function of t (no switch inside scipy's failure region)
_ASYMPTOTIC_Z = 1e8


def _log_ive_hankel(nu, z):
    # large-argument series, used when 4 nu^2 / 8z < 0.1
    mu = 4.0 * np.asarray(nu, dtype=float) ** 2
    x = 8.0 * np.asarray(z, dtype=float)
    term = np.ones_like(mu)
    total = np.ones_like(mu)
    for k in range(1, 9):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * x)
        total = total + term
    return -0.5 * np.log(2 * np.pi * z) + np.log(total)


def _log_ive_debye(nu, z):
    # uniform large-order expansion with three correction terms
    s = z / nu
    root = np.sqrt(1.0 + s * s)
    # eta - s, using root - s = 1/(root + s) to avoid cancellation at large s
    gap = 1.0 / (root + s)
    eta_minus_s = gap - np.log1p((1.0 + gap) / s)
    p = 1.0 / root
    u1 = (3 * p - 5 * p**3) / 24.0
    u2 = (81 * p**2 - 462 * p**4 + 385 * p**6) / 1152.0
    u3 = (30375 * p**3 - 369603 * p**5 + 765765 * p**7 - 425425 * p**9) / 414720.0
    return (nu * eta_minus_s) - 0.5 * np.log(2 * np.pi * nu) - 0.5 * np.log(root) + np.log1p(u1 / nu + u2 / nu**2 + u3 / nu**3)


def _log_ive_asymptotic(nu, z):
    nu, z = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(z, dtype=float))
    out = np.empty(nu.shape)
    hank = 4.0 * nu * nu < 0.8 * z
    out[hank] = _log_ive_hankel(nu[hank], z[hank])
    out[~hank] = _log_ive_debye(nu[~hank], z[~hank])
    return out


def log_ive(nu, z) -> np.ndarray:
    """log(exp(-z) I_nu(z)) for integer orders ``nu >= 0`` and ``z > 0``.

    ``nu`` and ``z`` broadcast. Returns ``-inf`` where the value underflows
    double precision.
    """
    nu = np.abs(np.asarray(nu, dtype=float))
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("argument must be positive")
    nu, z = np.broadcast_arrays(nu, z)
    out = np.empty(nu.shape)
    big = z >= _ASYMPTOTIC_Z
    if np.any(big):
        out[big] = _log_ive_asymptotic(nu[big], z[big])
    if not np.all(big):
        with np.errstate(divide="ignore"):
            out[~big] = np.log(special.ive(nu[~big], z[~big]))
    return out if out.ndim else out[()]


def log_heat_kernel_times(t, x) -> np.ndarray:
    """log p_t(x) at an array of positive times ``t`` for one displacement."""
    t = np.asarray(t, dtype=float)
    x = np.abs(np.asarray(x).reshape(-1))
    # identical coordinates share one Bessel evaluation
    vals, counts = np.unique(x, return_counts=True)
    return sum(c * log_ive(v, 2.0 * t) for v, c in zip(vals, counts))


def log_heat_kernel(t: float, x) -> float:
    """log p_t(x) for the rate-2d walk on Z^d; ``x`` is one integer vector."""
    if t <= 0:
        raise ValueError("time must be positive")
    return float(np.sum(log_ive(np.asarray(x), 2.0 * t)))


def log_heat_kernel_origin(t: float, d: int) -> float:
    return d * float(log_ive(0.0, 2.0 * t))


def heat_kernel(t: float, x) -> float:
    if t == 0:
        return float(not np.any(np.asarray(x)))
    return math.exp(log_heat_kernel(t, x))


def continuum_log_heat_kernel(t: float, x, d: int | None = None) -> float:
    """Log of the Gaussian (4 pi t)^(-d/2) exp(-|x|^2/4t)."""
    x = np.asarray(x, dtype=float)
    d = x.size if d is None else d
    return -0.5 * d * math.log(4 * math.pi * t) - float(np.sum(x * x)) / (4 * t)
