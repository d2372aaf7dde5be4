"""Second-order renormalisation-group flow of bulk and observable couplings.

The bulk flow tracks (g, nu) together with the reference sequence gbar;
the observable flow tracks the direction h, the observable couplings
lambda_x, q_x, t_x at the two points x = a, b, and the eigenvalue products
Pi_j. All per-scale inputs come from a :class:`~phi4log.covariance.Decomposition`.

``nu`` is carried in the scaled form nu_hat_j = L^(2j) nu_j, which is of
order g at every scale, so flows of many thousands of scales neither
overflow nor underflow.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .covariance import Decomposition, delta_op
from .lattice import ScaleGeometry, coalescence_scale, mass_scale

SCHEMA = "phi4log.flowtrace/1"
NU_MODES = ("tuned", "zero")
TRACE_COLUMNS = (
    "j", "g", "nu_hat", "gbar", "beta", "chi", "delta", "f_plus", "f_minus",
    "lambda_a", "lambda_b", "q_a", "q_b", "t_a", "t_b", "Gamma", "Pi",
)


class DomainExit(ArithmeticError):
    """A coupling left the region where the perturbative flow is defined."""


# -- exponents and elementary maps -------------------------------------------

def gamma_exponent(n: int, p: int, branch: str = "+") -> float:
    """Exponent of the logarithmic correction for the E+ or E- eigenspace."""
    if n < 0 or p < 1:
        raise ValueError("need n >= 0 and p >= 1")
    if branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")
    c = comb(p, 2)
    if n == 0:
        return c / 4
    if branch == "-":
        if n == 1:
            raise ValueError("n = 1 has no E- eigenspace")
        return c * 2 / (n + 8)
    return c * (n + 2) / (n + 8)


def gbar_step(gbar: float, beta: float) -> float:
    """gbar - beta * gbar^2; raises :class:`DomainExit` if the result is not positive."""
    if gbar <= 0:
        raise DomainExit(f"gbar = {gbar} is not positive")
    out = gbar - beta * gbar * gbar
    if out <= 0:
        raise DomainExit(f"gbar step left the positive axis ({out})")
    return out


def chi_factor(j: int, j_m, Omega: float = 2.0) -> float:
    """Omega^(-(j - j_m)_+); identically 1 when j_m is infinite."""
    if not Omega > 1:
        raise ValueError("Omega must exceed 1")
    if math.isinf(j_m):
        return 1.0
    return Omega ** (-max(j - j_m, 0))


@dataclass(frozen=True)
class M2Matrix:
    """The n x n matrix r I + s J, with J the all-ones matrix.

    For n = 0 the matrix is the 1 x 1 scalar r (and s must vanish).
    """

    r: float
    s: float
    n: int

    @property
    def dim(self) -> int:
        return max(self.n, 1)

    @property
    def eig_plus(self) -> float:
        return self.r + self.dim * self.s

    @property
    def eig_minus(self) -> float:
        return self.r

    def matrix(self) -> np.ndarray:
        return self.r * np.eye(self.dim) + self.s * np.ones((self.dim, self.dim))

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.r * v + self.s * np.sum(v)


def t_matrix(n: int, p: int) -> M2Matrix:
    c = comb(p, 2)
    if n == 0:
        return M2Matrix(c / 4, 0.0, 0)
    if n == 1:
        return M2Matrix(c / 3, 0.0, 1)
    return M2Matrix(c * 2 / (n + 8), c / (n + 8), n)


def a_matrix(n: int, p: int, g: float, delta_nu_w1: float, beta: float, below_coalescence: bool) -> M2Matrix:
    """(1 - p delta) I - beta g T below the coalescence scale, identity above."""
    if not below_coalescence:
        return M2Matrix(1.0, 0.0, n)
    T = t_matrix(n, p)
    return M2Matrix(1.0 - p * delta_nu_w1 - beta * g * T.r, -beta * g * T.s, n)


def eigen_f(n: int, p: int, branch: str, g: float, delta_nu_w1: float, beta: float,
            below_coalescence: bool) -> float:
    """Eigenvalue of the A matrix on E+ or E-."""
    if not below_coalescence:
        return 1.0
    gamma = 0.0 if p == 1 else gamma_exponent(n, p, branch)
    return 1.0 - p * delta_nu_w1 - beta * g * gamma


def eigenvector(n: int, branch: str) -> np.ndarray:
    """Unit vector in E+ (n^(-1/2) e+) or E- (2^(-1/2) (1, -1, 0, ...))."""
    if n <= 1:
        if branch == "-" and n == 1:
            raise ValueError("n = 1 has no E- eigenspace")
        return np.ones(1)
    if branch == "+":
        return np.full(n, n**-0.5)
    h = np.zeros(n)
    h[:2] = (2**-0.5, -(2**-0.5))
    return h


# -- couplings -----------------------------------------------------------------

@dataclass(frozen=True)
class BulkCouplings:
    """Bulk couplings at one scale; ``nu_hat`` is L^(2j) nu."""

    g: float
    nu: float
    gbar: float
    nu_hat: float | None = None

    def scaled_nu(self, L: int, j: int) -> float:
        return self.nu * float(L) ** (2 * j) if self.nu_hat is None else self.nu_hat


@dataclass(frozen=True)
class ObservableCouplings:
    h: np.ndarray
    lambda_a: float
    lambda_b: float
    q_a: float = 0.0
    q_b: float = 0.0
    t_a: float = 0.0
    t_b: float = 0.0

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        object.__setattr__(self, "h", h)


def _varsigma(dec: Decomposition, n: int, g: float, nu_hat: float, j: int, below: bool) -> float:
    s = dec.step(j)
    nu = nu_hat * float(dec.L) ** (-2 * j) if j < 500 else 0.0
    nup = nu + g * (n + 2) * s.c00
    out = s.c00 * (1.0 - (2.0 * nu_hat * s.a0 if below else 0.0))
    if below:
        return out + nup * s.dw2
    return out + nup * s.w2_1 - nu * s.w2_0


def observable_step(obs: ObservableCouplings, bulk: BulkCouplings, dec: Decomposition, j: int,
                    geo: ScaleGeometry, n: int, p: int, a=None, b=None) -> ObservableCouplings:
    """Map the observable couplings at scale j to scale j+1.

    ``a`` and ``b`` (coordinates) are needed only for the q update, which is
    nonzero from the coalescence scale on.
    """
    h = obs.h
    norm_h = float(np.linalg.norm(h))
    if norm_h == 0:
        raise ValueError("h must be nonzero")
    if abs(norm_h - 1) > 1e-9:
        raise ValueError(f"h must be a unit vector, |h| = {norm_h}")
    below = j + 1 < geo.j_ab
    nu_hat = bulk.scaled_nu(dec.L, j)
    s = dec.step(j)
    delta = (nu_hat + bulk.g * (n + 2) * s.c00_hat) * s.a1 - nu_hat * s.a0
    beta = (n + 8) * s.dw2
    A = a_matrix(n, p, bulk.g, delta, beta, below)
    Ah = A.apply(h)
    norm = float(np.linalg.norm(Ah))
    if below:
        h_new, lam_a, lam_b = Ah / norm, norm * obs.lambda_a, norm * obs.lambda_b
    else:
        h_new, lam_a, lam_b = h, obs.lambda_a, obs.lambda_b
    dq = 0.0
    if not math.isinf(geo.j_ab) and j >= geo.j_ab and (obs.lambda_a * obs.lambda_b) != 0:
        if a is None or b is None:
            raise ValueError("a and b are needed for the q update")
        dq = factorial(p) * obs.lambda_a * obs.lambda_b * delta_op(
            dec, n, bulk.g, 0.0, j, "wp_ab", a=a, b=b, p=p, j_ab=geo.j_ab)
    t_a, t_b = obs.t_a, obs.t_b
    if n >= 1 and p == 2:
        sig = _varsigma(dec, n, bulk.g, nu_hat, j, below) * float(np.sum(h))
        t_a += obs.lambda_a * sig
        t_b += obs.lambda_b * sig
    return ObservableCouplings(h_new, lam_a, lam_b, obs.q_a + dq, obs.q_b + dq, t_a, t_b)


# -- bulk flow -----------------------------------------------------------------

@dataclass(frozen=True)
class BulkFlow:
    g: np.ndarray
    nu_hat: np.ndarray
    gbar: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    exit_scale: int | None
    exit_reason: str | None


def _step_arrays(dec: Decomposition, n: int, J: int):
    steps = [dec.step(j) for j in range(J)]
    c_hat = np.array([s.c00_hat for s in steps])
    a0 = np.array([s.a0 for s in steps])
    a1 = np.array([s.a1 for s in steps])
    beta = (n + 8) * np.array([s.dw2 for s in steps])
    return c_hat, a0, a1, beta


def bulk_flow(n: int, L: int, g0: float, dec: Decomposition, J: int, nu_mode: str = "tuned",
              C_D: float = 4.0, tune_iterations: int = 200) -> BulkFlow:
    """Couplings g_j, nu_hat_j, gbar_j for j = 0..J.

    ``nu_mode="zero"`` keeps nu = 0 and runs g_{j+1} = g_j - beta_j g_j^2.
    ``nu_mode="tuned"`` flows nu by nu_{j+1} = nu_j + (n+2) g_j C_{j+1;00}
    with the initial value fixed so that L^(2j) nu_j stays bounded: the
    bounded solution is the backward sum
    nu_hat_j = L^-2 nu_hat_{j+1} - (n+2) g_j c_hat_j. Then g follows
    g_{j+1} = g_j (1 - beta_j g_j - 4 delta_j) with
    delta_j = nu_{j+1} w_{j+1}^(1) - nu_j w_j^(1), and the pair (g, nu) is
    solved by fixed-point iteration.
    """
    if nu_mode not in NU_MODES:
        raise ValueError(f"nu_mode must be one of {NU_MODES}")
    # extra scales past J make the backward sum insensitive to its end point
    J_end = J + 24 if dec.covers(J + 24) else J
    if not dec.covers(J - 1):
        raise ValueError(f"decomposition (J = {dec.J}) does not cover {J} scales")
    c_hat, a0, a1, beta = _step_arrays(dec, n, J_end)
    L2 = float(L) ** 2

    gbar = np.empty(J_end + 1)
    gbar[0] = g0
    for j in range(J_end):
        gbar[j + 1] = gbar[j] - beta[j] * gbar[j] ** 2

    def forward_g(nu_hat):
        g = np.empty(J_end + 1)
        delta = np.empty(J_end)
        g[0] = g0
        for j in range(J_end):
            delta[j] = (nu_hat[j] + g[j] * (n + 2) * c_hat[j]) * a1[j] - nu_hat[j] * a0[j]
            if nu_mode == "zero":
                g[j + 1] = g[j] - beta[j] * g[j] ** 2
            else:
                g[j + 1] = g[j] * (1.0 - beta[j] * g[j] - 4.0 * delta[j])
        return g, delta

    nu_hat = np.zeros(J_end + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        if nu_mode == "zero":
            g, delta = forward_g(nu_hat)
        else:
            # start from gbar: with nu = 0 the first step can overshoot badly
            g = gbar.copy()
            for _ in range(tune_iterations):
                new = np.empty(J_end + 1)
                # stationary value of the backward recursion at the far end
                new[J_end] = -(n + 2) * g[J_end] * c_hat[J_end - 1] / (1.0 - 1.0 / L2)
                for j in range(J_end - 1, -1, -1):
                    new[j] = new[j + 1] / L2 - (n + 2) * g[j] * c_hat[j]
                g, delta = forward_g(new)
                change = np.max(np.abs(new - nu_hat))
                nu_hat = new
                if change <= 1e-15 * max(g0, 1e-300):
                    break

    exit_scale, reason = None, None
    # g0 = 0 is the free flow: every coupling stays at zero
    for j in range(J + 1 if g0 > 0 else 0):
        if not g[j] > 0:
            exit_scale, reason = j, f"g_{j} = {g[j]:.3e} is not positive"
            break
        if abs(nu_hat[j]) > C_D * g[j]:
            exit_scale, reason = j, f"|L^(2j) nu_{j}| = {abs(nu_hat[j]):.3e} exceeds {C_D} g_{j}"
            break
        if not gbar[j] > 0:
            exit_scale, reason = j, f"gbar_{j} is not positive"
            break
    stop = J if exit_scale is None else exit_scale
    return BulkFlow(g[: stop + 1], nu_hat[: stop + 1], gbar[: stop + 1], beta[:stop], delta[:stop],
                    exit_scale, reason)


# -- full flow -----------------------------------------------------------------

@dataclass(frozen=True)
class FlowTrace:
    """Per-scale record of a flow.

    Row j holds the couplings at scale j; ``beta``, ``delta``, ``f_plus``,
    ``f_minus`` are the step quantities for j -> j+1 (``nan`` on the last
    row). ``Pi[j]`` is the product of the branch eigenvalues f_0..f_{j-1}
    and ``Gamma[j] = (g_j / g_0)^gamma``.
    """

    config: dict
    columns: dict
    h: np.ndarray
    exit_scale: int | None = None
    exit_reason: str | None = None

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["j"])

    @property
    def completed(self) -> bool:
        return self.exit_scale is None

    @property
    def j_ab(self):
        return self.config["j_ab"]

    def lambda_at(self, j: int, x: str = "a") -> float:
        return float(self.columns[f"lambda_{x}"][j])

    @property
    def lambda_jab(self) -> tuple[float, float]:
        j = int(min(self.j_ab, len(self) - 1))
        return self.lambda_at(j, "a"), self.lambda_at(j, "b")

    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={SCHEMA}\n# config_sha256={self.config_hash()}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i in range(len(self)):
            w.writerow([_fmt(self.columns[c][i]) for c in TRACE_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = dict(schema=SCHEMA, config=self.config, config_sha256=self.config_hash(),
                   exit_scale=self.exit_scale, exit_reason=self.exit_reason,
                   columns={c: [_json_num(v) for v in self.columns[c]] for c in TRACE_COLUMNS},
                   h=[[_json_num(v) for v in row] for row in self.h])
        return json.dumps(doc, sort_keys=True, indent=1)


def _fmt(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else str(v)


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def run_flow(n: int, p: int, L: int, m2: float, g0: float, branch: str, a, b, J_max: int,
             dec: Decomposition, *, nu_mode: str = "tuned", Omega: float = 2.0, C_D: float = 4.0,
             j_ab=None, h0=None, lambda0=(1.0, 1.0)) -> FlowTrace:
    """Run the bulk and observable flows for scales 0..J_max.

    Parameters
    ----------
    a, b : coordinate vectors or None
        Observable points. With ``a = b = None`` a coalescence scale must be
        given through ``j_ab``; a finite value picks the axis pair
        a = 0, b = (ceil(L^j_ab / 2), 0, 0, 0), and ``math.inf`` gives star
        networks, where the q update never fires.
    h0 : array, optional
        Initial direction; defaults to the unit vector of ``branch``.
    lambda0 : pair
        Initial (lambda_a, lambda_b); star networks use (1, 0).
    """
    if not 0 <= g0 <= 0.2:
        raise ValueError("g0 must lie in [0, 0.2]")
    if dec.L != L or dec.m2 != m2 or dec.d != 4:
        raise ValueError("decomposition does not match (L, m2, d = 4)")
    if n == 1 and branch == "-":
        raise ValueError("n = 1 has no E- eigenspace")
    if j_ab is None:
        if a is None or b is None:
            raise ValueError("give a and b or j_ab")
        j_ab = coalescence_scale(L, a, b)
    elif a is None and not math.isinf(j_ab):
        # representative pair on an axis with exactly this coalescence scale
        a, b = (0, 0, 0, 0), (-(-(L**j_ab) // 2), 0, 0, 0)
        assert coalescence_scale(L, a, b) == j_ab
    geo = ScaleGeometry(j_ab, mass_scale(L, m2), Omega)
    gamma = 0.0 if p == 1 else gamma_exponent(n, p, branch)
    config = dict(n=n, p=p, L=L, m2=m2, g0=g0, branch=branch, J_max=J_max, nu_mode=nu_mode,
                  Omega=Omega, C_D=C_D, j_ab=j_ab if not math.isinf(j_ab) else "inf",
                  j_m=geo.j_m if not math.isinf(geo.j_m) else "inf", gamma=gamma,
                  a=None if a is None else [int(v) for v in a], b=None if b is None else [int(v) for v in b],
                  lambda0=list(lambda0))

    bulk = bulk_flow(n, L, g0, dec, J_max, nu_mode, C_D)
    J = len(bulk.g) - 1
    h = eigenvector(n, branch) if h0 is None else np.atleast_1d(np.asarray(h0, dtype=float))
    obs = ObservableCouplings(h, *lambda0)
    rows = {c: np.full(J + 1, np.nan) for c in TRACE_COLUMNS}
    hs = np.empty((J + 1, h.size))
    Pi = 1.0
    for j in range(J + 1):
        rows["j"][j] = j
        rows["g"][j], rows["nu_hat"][j], rows["gbar"][j] = bulk.g[j], bulk.nu_hat[j], bulk.gbar[j]
        rows["chi"][j] = chi_factor(j, geo.j_m, Omega)
        for c, v in zip(("lambda_a", "lambda_b", "q_a", "q_b", "t_a", "t_b"),
                        (obs.lambda_a, obs.lambda_b, obs.q_a, obs.q_b, obs.t_a, obs.t_b)):
            rows[c][j] = v
        rows["Gamma"][j] = (bulk.g[j] / g0) ** gamma if g0 > 0 else 1.0
        rows["Pi"][j] = Pi
        hs[j] = obs.h
        if j == J:
            break
        below = j + 1 < j_ab
        beta, delta = bulk.beta[j], bulk.delta[j]
        rows["beta"][j], rows["delta"][j] = beta, delta
        rows["f_plus"][j] = eigen_f(n, p, "+", bulk.g[j], delta, beta, below)
        rows["f_minus"][j] = eigen_f(n, p, "-" if n != 1 else "+", bulk.g[j], delta, beta, below)
        f = rows["f_plus" if branch == "+" else "f_minus"][j]
        if not f > 0:
            return FlowTrace(config, {c: v[: j + 1] for c, v in rows.items()}, hs[: j + 1], j,
                             f"eigenvalue f_{j} = {f:.3e} is not positive")
        Pi *= f
        couplings = BulkCouplings(bulk.g[j], 0.0, bulk.gbar[j], nu_hat=bulk.nu_hat[j])
        obs = observable_step(obs, couplings, dec, j, geo, n, p, a, b)
    return FlowTrace(config, rows, hs, bulk.exit_scale, bulk.exit_reason)


# -- predictions ---------------------------------------------------------------

def _green_value(green, a=None, b=None) -> float:
    if callable(green) and not isinstance(green, (int, float)):
        return float(green(a, b))
    return float(green)


def q_infinity(trace: FlowTrace, green) -> float:
    """p! lambda_{a,j_ab} lambda_{b,j_ab} G_ab^p, the limit of the q flow.

    ``green`` is the value G_ab(m2) or a callable ``green(a, b)``.
    """
    cfg = trace.config
    if cfg["j_ab"] == "inf":
        raise ValueError("q_infinity needs a finite coalescence scale")
    if len(trace) - 1 < cfg["j_ab"]:
        raise ValueError("trace ends before the coalescence scale")
    lam_a, lam_b = trace.lambda_jab
    G = _green_value(green, cfg["a"], cfg["b"])
    return factorial(cfg["p"]) * lam_a * lam_b * G ** cfg["p"]


@dataclass(frozen=True)
class CorrelationPrediction:
    """Leading-order truncated correlations of squared spin components."""

    same: float
    cross: float
    energy: float
    q_plus: float
    q_minus: float

    @property
    def ratio(self) -> float:
        return self.cross / self.same


def predict_correlations(n: int, trace_plus: FlowTrace, trace_minus: FlowTrace, green) -> CorrelationPrediction:
    """<(phi^1_a)^2;(phi^1_b)^2>, <(phi^1_a)^2;(phi^2_b)^2> and <|phi_a|^2;|phi_b|^2>.

    With q+- = q_infinity of the two branch traces, decomposing the
    observable directions over the eigenbasis gives
    same = (q+ + (n-1) q-)/n, cross = (q+ - q-)/n and energy = n q+.
    """
    if n < 2:
        raise ValueError("both eigenspaces exist only for n >= 2")
    for tr, br in ((trace_plus, "+"), (trace_minus, "-")):
        if tr.config["branch"] != br or tr.config["p"] != 2 or tr.config["n"] != n:
            raise ValueError(f"trace for branch {br} has the wrong configuration")
    keys = ("L", "m2", "g0", "j_ab", "nu_mode")
    if any(trace_plus.config[k] != trace_minus.config[k] for k in keys):
        raise ValueError("branch traces must share (L, m2, g0, j_ab)")
    qp, qm = q_infinity(trace_plus, green), q_infinity(trace_minus, green)
    return CorrelationPrediction((qp + (n - 1) * qm) / n, (qp - qm) / n, n * qp, qp, qm)


def predict_star_ratio(n: int, p: int, trace: FlowTrace) -> float:
    """p! lambda*_inf from a star-normalised trace (no coalescence, lambda_b = 0).

    The trace must run far enough past the mass scale for lambda to settle.
    """
    cfg = trace.config
    if cfg["j_ab"] != "inf" or cfg["lambda0"][1] != 0:
        raise ValueError("star ratio needs j_ab = inf and lambda_b = 0")
    if cfg["n"] != n or cfg["p"] != p:
        raise ValueError("trace configuration does not match (n, p)")
    return factorial(p) * trace.lambda_at(len(trace) - 1, "a")


def star_ratio_formula(p: int, gamma: float, g0: float, bubble_value: float, v: float = 1.0) -> float:
    """p! v (g_inf / g0)^gamma with g_inf taken as 1 / B_{m2}."""
    return factorial(p) * v * (1.0 / (bubble_value * g0)) ** gamma


@dataclass(frozen=True)
class MassiveTwoPoint:
    value: float
    error_budget: float


def predict_massive_twopoint(green_m: float, green_0: float, trace: FlowTrace) -> MassiveTwoPoint:
    """Leading term G_ab(0, m2) and error budget chi_{j_ab} gbar_{j_ab} G_ab(0, 0)."""
    if trace.config["p"] != 1:
        raise ValueError("the two-point prediction uses p = 1 traces")
    j = int(min(trace.j_ab, len(trace) - 1))
    budget = trace["chi"][j] * trace["gbar"][j] * green_0
    return MassiveTwoPoint(float(green_m), float(budget))


def fit_log_exponent(points, x_is_log: bool = False) -> tuple[float, float, float]:
    """Fit y = A (log x)^(-gamma) by least squares in (log log x, log y).

    With ``x_is_log`` the first column already holds log x, for separations
    too large for a float.

    Returns (gamma, A, max relative residual).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4 or pts.shape[1] != 2:
        raise ValueError("need at least 4 (x, y) points")
    x, y = pts.T
    log_x = x if x_is_log else np.log(np.maximum(x, 1e-300))
    if np.any(log_x <= 1) or np.any(y <= 0):
        raise ValueError("need x > e and y > 0")
    u = np.log(log_x)
    slope, icpt = np.polyfit(u, np.log(y), 1)
    A = math.exp(icpt)
    resid = float(np.max(np.abs(A * np.exp(slope * u) / y - 1)))
    return float(-slope), A, resid


__all__ = [
    "BulkCouplings", "BulkFlow", "CorrelationPrediction", "DomainExit", "FlowTrace", "M2Matrix",
    "MassiveTwoPoint", "ObservableCouplings", "a_matrix", "bulk_flow", "chi_factor", "config_hash",
    "eigen_f", "eigenvector", "fit_log_exponent", "gamma_exponent", "gbar_step", "observable_step",
    "predict_correlations", "predict_massive_twopoint", "predict_star_ratio", "q_infinity",
    "run_flow", "star_ratio_formula", "t_matrix",
]
