"""Metropolis sampling of the n-component |phi|^4 model on a torus and a
quadrature oracle for the single-site model."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..lattice import TorusLattice
from ..mcstats import McEstimate, MIN_BATCHES, jackknife, run_batches, split_counts, from_batches

TARGET_ACCEPTANCE = 0.4
CSV_COLUMNS = ("observable", "mean", "stderr", "count", "seed")


def _check_params(n: int, g: float, nu: float):
    if n < 1:
        raise ValueError("spin dimension must be at least 1")
    if g < 0:
        raise ValueError("g must be nonnegative")
    if g == 0 and nu <= 0:
        raise ValueError("the Gaussian model with nu <= 0 is not normalisable")


def phi4_energy(lat: TorusLattice, phi, g: float, nu: float) -> np.ndarray:
    """sum_x [g/4 |phi_x|^4 + nu/2 |phi_x|^2 + 1/2 phi_x . (-Delta phi)_x].

    ``phi`` has shape (..., M, n); the leading axes are kept.
    """
    phi = np.asarray(phi, dtype=float)
    sq = np.sum(phi * phi, axis=-1)
    lap = lat.laplacian_matrix()
    grad = -np.einsum("xy,...yi,...xi->...", lap, phi, phi)
    return np.sum(0.25 * g * sq * sq + 0.5 * nu * sq, axis=-1) + 0.5 * grad


def _radial_moment(n: int, g: float, nu: float, k: int) -> float:
    # int_0^inf r^(n-1+k) exp(-g r^4/4 - nu r^2/2) dr, rescaled by its peak
    e = n - 1 + k

    def log_f(r):
        return e * math.log(r) - 0.25 * g * r**4 - 0.5 * nu * r * r if r > 0 else -math.inf

    # peak of the log integrand solves g r^4 + nu r^2 = e
    r0 = math.sqrt(max((-nu + math.sqrt(nu * nu + 4 * g * e)) / (2 * g), 1e-300)) if g > 0 else math.sqrt(e / nu)
    ref = log_f(r0) if r0 > 0 else 0.0
    # beyond the peak the integrand falls at least like exp(-g s^4/4) or exp(-nu s^2/2)
    reach = [(160.0 / g) ** 0.25] if g > 0 else []
    if nu > 0:
        reach.append(math.sqrt(80.0 / nu))
    hi = r0 + min(reach) + 10
    val, _ = integrate.quad(lambda r: math.exp(log_f(r) - ref) if r > 0 else float(e == 0),
                            0.0, hi, points=[r0] if r0 > 0 else None, epsabs=0, epsrel=1e-13, limit=200)
    return val * math.exp(ref)


ONESITE_MOMENTS = ("phi_sq", "phi_4", "phi1_sq", "phi1_4", "phi1sq_phi2sq", "same_cov", "cross_cov")


def phi4_onesite_oracle(n: int, g: float, nu: float, which: str) -> float:
    """Moments of the single-site density exp(-g|phi|^4/4 - nu|phi|^2/2) on R^n.

    Radial integrals r^(n-1+k) combine with the angular averages
    E[u_1^2] = 1/n, E[u_1^4] = 3/(n(n+2)) and E[u_1^2 u_2^2] = 1/(n(n+2))
    over the unit sphere. ``which`` is one of ``ONESITE_MOMENTS``; the two
    covariances are <(phi^1)^2 (phi^j)^2> - <(phi^1)^2>^2 with j = 1 (same)
    and j = 2 (cross, n >= 2).
    """
    _check_params(n, g, nu)
    if which not in ONESITE_MOMENTS:
        raise ValueError(f"unknown moment {which!r}; choose from {ONESITE_MOMENTS}")
    m0 = _radial_moment(n, g, nu, 0)
    r2 = _radial_moment(n, g, nu, 2) / m0
    r4 = _radial_moment(n, g, nu, 4) / m0
    a2, a4, a22 = 1.0 / n, 3.0 / (n * (n + 2)), 1.0 / (n * (n + 2))
    if which in ("phi1sq_phi2sq", "cross_cov") and n < 2:
        raise ValueError("cross-component moments need n >= 2")
    return {
        "phi_sq": lambda: r2,
        "phi_4": lambda: r4,
        "phi1_sq": lambda: a2 * r2,
        "phi1_4": lambda: a4 * r4,
        "phi1sq_phi2sq": lambda: a22 * r4,
        "same_cov": lambda: a4 * r4 - (a2 * r2) ** 2,
        "cross_cov": lambda: a22 * r4 - (a2 * r2) ** 2,
    }[which]()


@dataclass
class Phi4Estimates:
    """Estimates from ``phi4_mc``, keyed by observable name.

    ``two_point`` and ``two_point_1`` list <phi_a . phi_x> and
    <phi^1_a phi^1_x> against the site x; ``acceptance`` and ``width`` are
    the per-batch Metropolis acceptance rate and frozen proposal width.
    """

    estimates: dict
    two_point: list
    two_point_1: list
    acceptance: np.ndarray
    width: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)

    def __getitem__(self, key) -> McEstimate:
        return self.estimates[key]

    def rows(self):
        for name, est in self.estimates.items():
            yield name, est
        for x, est in enumerate(self.two_point):
            yield f"two_point[{x}]", est
        for x, est in enumerate(self.two_point_1):
            yield f"two_point_1[{x}]", est

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (header or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for name, est in self.rows():
            w.writerow([name, repr(est.mean), repr(est.stderr), est.count, est.seed])
        return buf.getvalue()


def _metropolis_batch(lat, n, g, nu, chains, sweeps, therm, a, b, rng):
    M = lat.sites
    A = lat.adjacency.toarray()
    diag = np.diag(A).copy()
    off = A - np.diag(diag)
    # quadratic coefficient of the single-site energy
    quad = 0.5 * (nu + lat.degree - diag)
    phi = rng.normal(0.0, 1.0 / math.sqrt(max(nu, 0) + 1.0), (chains, M, n))
    width = np.full(M, 1.5 / math.sqrt(max(nu, 0) + lat.degree - diag.min() + 1.0) + 0.5 / (1 + g))
    trans = _translations(lat)
    acc_count = 0
    sums: dict = {}

    def local(x, v, h):
        s = np.sum(v * v, axis=-1)
        return 0.25 * g * s * s + quad[x] * s - np.sum(v * h, axis=-1)

    def sweep(track):
        nonlocal acc_count
        rates = np.zeros(M)
        for x in range(M):
            h = np.einsum("y,cyi->ci", off[x], phi)
            old = phi[:, x, :]
            new = old + width[x] * rng.uniform(-1.0, 1.0, old.shape)
            dE = local(x, new, h) - local(x, old, h)
            ok = rng.random(chains) < np.exp(-np.maximum(dE, 0.0))
            phi[ok, x, :] = new[ok]
            rates[x] = ok.mean()
            if track:
                acc_count += int(ok.sum())
        return rates

    for _ in range(therm):
        rates = sweep(False)
        # Robbins-Monro style width adaptation, frozen after thermalisation
        width *= np.exp(0.5 * (rates - TARGET_ACCEPTANCE))
    for _ in range(sweeps):
        sweep(True)
        _accumulate(sums, phi, a, b, n, trans)
    count = chains * sweeps
    means = {k: v / count for k, v in sums.items()}
    return means, acc_count / (count * M), width.mean()


def _translations(lat: TorusLattice) -> np.ndarray:
    # trans[y, x] = index of site y + x
    c = lat.coords(np.arange(lat.sites))
    return lat.index(c[:, None, :] + c[None, :, :])


def _accumulate(sums, phi, a, b, n, trans):
    pa, pb = phi[:, a, :], phi[:, b, :]
    sqa, sqb = np.sum(pa * pa, axis=-1), np.sum(pb * pb, axis=-1)
    M = phi.shape[1]
    # translation averaged two-point function, indexed by displacement site
    dots = np.einsum("cyi,cyxi->cx", phi, phi[:, trans, :]) / M
    first = np.einsum("cy,cyx->cx", phi[:, :, 0], phi[:, trans, 0]) / M
    total = phi.sum(axis=1)
    obs = {
        "two_point": dots.sum(axis=0),
        "two_point_1": first.sum(axis=0),
        "susceptibility": np.sum(total * total) / (n * M),
        "phi_sq": np.sum(sqa),
        "phi1_sq": np.sum(pa[:, 0] ** 2),
        "phi1_4": np.sum(pa[:, 0] ** 4),
        "phi1_a": np.sum(pa[:, 0]),
        "sq_a": np.sum(pa[:, 0] ** 2),
        "sq_b": np.sum(pb[:, 0] ** 2),
        "sq_ab_same": np.sum(pa[:, 0] ** 2 * pb[:, 0] ** 2),
        "norm_a": np.sum(sqa),
        "norm_b": np.sum(sqb),
        "norm_ab": np.sum(sqa * sqb),
    }
    if n >= 2:
        obs["phi1_a_phi2_b"] = np.sum(pa[:, 0] * pb[:, 1])
        obs["sq2_b"] = np.sum(pb[:, 1] ** 2)
        obs["sq_ab_cross"] = np.sum(pa[:, 0] ** 2 * pb[:, 1] ** 2)
        obs["phi1sq_phi2sq"] = np.sum(pa[:, 0] ** 2 * pa[:, 1] ** 2)
    for k, v in obs.items():
        sums[k] = sums.get(k, 0) + v


def phi4_mc(lat: TorusLattice, n: int, g: float, nu: float, sweeps: int, therm: int, seed: int,
            a: int = 0, b: int | None = None, chains: int = 1024, n_batches: int = MIN_BATCHES,
            threads: int = 1) -> Phi4Estimates:
    """Metropolis estimates for the measure exp(-U) prod_x dphi_x on the torus.

    Chains are split into ``n_batches`` groups of independent chains; group
    i draws from ``stream(seed, i)`` and its chains advance together, so
    results do not depend on ``threads``. ``sweeps`` counts measurement
    sweeps summed over all chains; each chain also runs ``therm`` sweeps
    while its proposal width adapts towards 40% acceptance. Errors come
    from the spread of the independent group means, with jackknife errors
    for the truncated correlations

    ``sq_same`` = <(phi^1_a)^2 ; (phi^1_b)^2>,
    ``sq_cross`` = <(phi^1_a)^2 ; (phi^2_b)^2> and
    ``energy_corr`` = <|phi_a|^2 ; |phi_b|^2>.
    """
    _check_params(n, g, nu)
    if sweeps <= 0:
        raise ValueError("sweeps must be positive")
    b = lat.sites - 1 if b is None else b
    if chains < n_batches:
        raise ValueError("need at least one chain per batch")
    per_batch = split_counts(chains, n_batches)
    per_chain = max(1, math.ceil(sweeps / chains))

    def task(rng, c):
        return _metropolis_batch(lat, n, g, nu, c, per_chain, therm, a, b, rng)

    results = run_batches(task, per_batch, seed, threads)
    counts = [c * per_chain for c in per_batch]
    batch = {k: np.array([r[0][k] for r in results]) for k in results[0][0]}
    est = {}
    for k in ("susceptibility", "phi_sq", "phi1_sq", "phi1_4", "phi1_a", "phi1_a_phi2_b", "phi1sq_phi2sq"):
        if k in batch:
            est[k] = from_batches(batch[k], counts, seed)
    total = int(sum(counts))

    def truncated(pair, x, y):
        m, e = jackknife(lambda p, u, v: p - u * v, batch[pair], batch[x], batch[y])
        bm = batch[pair] - batch[x] * batch[y]
        return McEstimate(float(m), float(e), total, seed, tuple(bm.tolist()))

    est["sq_same"] = truncated("sq_ab_same", "sq_a", "sq_b")
    if n >= 2:
        est["sq_cross"] = truncated("sq_ab_cross", "sq_a", "sq2_b")
    est["energy_corr"] = truncated("norm_ab", "norm_a", "norm_b")
    two = [from_batches(batch["two_point"][:, x], counts, seed) for x in range(lat.sites)]
    two1 = [from_batches(batch["two_point_1"][:, x], counts, seed) for x in range(lat.sites)]
    cfg = dict(d=lat.d, L=lat.L, N=lat.N, n=n, g=g, nu=nu, sweeps=sweeps, therm=therm, a=a, b=b, chains=chains)
    return Phi4Estimates(est, two, two1, np.array([r[1] for r in results]), np.array([r[2] for r in results]),
                         seed, cfg)
