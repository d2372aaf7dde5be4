"""Cross-checks of the walk representation of spin correlations on tiny tori."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..greens import green_torus_exact, neumann_green
from ..lattice import TorusLattice
from .walks import watermelon_mc
from .wick import MAX_ORACLE_SITES, wick_permanent, wsaw_tiny_oracle


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


@dataclass
class RepresentationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, lhs, rhs, margin, passed):
        self.checks.append(Check(name, float(lhs), float(rhs), float(margin), bool(passed)))

    def summary(self) -> str:
        return "\n".join(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.lhs:.12g} vs {c.rhs:.12g} "
                         f"(margin {c.margin:.3g})" for c in self.checks)


def representation_check(lat: TorusLattice, g: float, nu: float, p: int, tol: float = 1e-10,
                         samples: int = 200_000, seed: int = 0, pairs=None,
                         use_oracle: bool = True) -> RepresentationReport:
    """Compare the spin side and the walk side of the p-watermelon.

    At g = 0 the spin side is the Wick permanent of the dense inverse of
    -Delta + nu and the walk side is p! times the p-th power of the walk
    expansion of the Green function (plus, when ``use_oracle``, the exact
    skeleton sum); they must agree to ``tol``. At g > 0 the skeleton
    oracle must lie within 3 sigma of the walk Monte Carlo (rerun once with
    4x samples on a miss) and strictly below its g = 0 value.
    """
    if lat.sites > MAX_ORACLE_SITES:
        raise ValueError(f"at most {MAX_ORACLE_SITES} sites")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if pairs is None:
        pairs = [(a, b) for a in range(lat.sites) for b in range(lat.sites)]
    report = RepresentationReport()
    if g == 0:
        C = green_torus_exact(lat, nu).entries
        walk = neumann_green(lat, nu, tail_tol=tol / 10)
        for a, b in pairs:
            lhs = wick_permanent(C, [a] * p, [b] * p)
            rhs = math.factorial(p) * walk[a, b] ** p
            diff = abs(lhs - rhs)
            report.add(f"wick=walk-expansion a={a} b={b} p={p} nu={nu}", lhs, rhs, tol - diff, diff <= tol)
            if use_oracle:
                orc = wsaw_tiny_oracle(lat, 0.0, nu, a, b, p, tol=tol / 2)
                diff = abs(lhs - orc)
                report.add(f"wick=skeleton-sum a={a} b={b} p={p} nu={nu}", lhs, orc, tol - diff, diff <= tol)
        return report
    for a, b in pairs:
        orc = wsaw_tiny_oracle(lat, g, nu, a, b, p, tol=1e-10)
        est = watermelon_mc(lat, g, nu, a, b, p, samples, seed)
        if not est.within(orc):
            est = watermelon_mc(lat, g, nu, a, b, p, 4 * samples, seed + 1)
        report.add(f"oracle=mc a={a} b={b} p={p} g={g} nu={nu}", orc, est.mean,
                   3 * est.stderr - abs(orc - est.mean), est.within(orc))
        free = wsaw_tiny_oracle(lat, 0.0, nu, a, b, p, tol=1e-10)
        report.add(f"decreasing-in-g a={a} b={b} p={p}", orc, free, free - orc, orc < free)
    return report
