"""Command-line experiment runner.

Every subcommand reads one JSON config document, validates it, runs, and
writes its table (CSV or JSON) plus ``manifest.json`` into the output
directory. Exit codes: 0 success, 2 config error, 3 domain exit of a
flow, 4 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
from dataclasses import dataclass

import jsonschema
import numpy as np
import scipy

from . import __version__
from .covariance import decompose
from .greens import bubble, bubble_constant, green_torus_exact, green_zd
from .lattice import TorusLattice
from .rgflow import config_hash, gamma_exponent, run_flow
from .models import (phi4_mc, phi4_onesite_oracle, representation_check, star_mc, watermelon_mc,
                     wick_permanent, wsaw_tiny_oracle)

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3, 4
TABLE_SCHEMA = "phi4log.table/1"

_num = {"type": "number"}
_int = {"type": "integer"}
_point = {"type": "array", "items": _int, "minItems": 1}
_torus = {
    "type": "object",
    "properties": {"d": {"type": "integer", "minimum": 1}, "L": {"type": "integer", "minimum": 2},
                   "N": {"type": "integer", "minimum": 0}},
    "required": ["d", "L", "N"],
    "additionalProperties": False,
}

SCHEMAS = {
    "green": {
        "properties": {"d": {"type": "integer", "minimum": 1}, "m2": {"type": "number", "minimum": 0},
                       "points": {"type": "array", "items": _point}, "torus": _torus},
        "defaults": {"d": 4, "m2": 0.0, "points": [[0, 0, 0, 0], [1, 0, 0, 0], [2, 0, 0, 0], [4, 0, 0, 0],
                                                   [8, 0, 0, 0], [16, 0, 0, 0]]},
    },
    "bubble": {
        "properties": {"n": {"type": "integer", "minimum": 0}, "d": {"type": "integer", "minimum": 3},
                       "m2": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}},
        "defaults": {"n": 0, "d": 4, "m2": [1e-2, 1e-3, 1e-4]},
    },
    "decompose": {
        "properties": {"d": {"type": "integer", "minimum": 3}, "L": {"type": "integer", "minimum": 2},
                       "m2": {"type": "number", "minimum": 0}, "J": {"type": "integer", "minimum": 1},
                       "n": {"type": "integer", "minimum": 0},
                       "cache_dir": {"type": ["string", "null"]}},
        "defaults": {"d": 4, "L": 2, "m2": 0.0, "J": 16, "n": 0, "cache_dir": None},
    },
    "flow": {
        "properties": {"n": {"type": "integer", "minimum": 0}, "p": {"type": "integer", "minimum": 1},
                       "L": {"type": "integer", "minimum": 2}, "m2": {"type": "number", "minimum": 0},
                       "g0": {"type": "number", "minimum": 0, "maximum": 0.2},
                       "branch": {"enum": ["+", "-"]}, "J_max": {"type": "integer", "minimum": 1},
                       "j_ab": {"type": ["integer", "null"], "minimum": 0},
                       "a": {"oneOf": [_point, {"type": "null"}]}, "b": {"oneOf": [_point, {"type": "null"}]},
                       "nu_mode": {"enum": ["tuned", "zero"]}, "Omega": {"type": "number", "exclusiveMinimum": 1},
                       "C_D": {"type": "number", "exclusiveMinimum": 0}},
        "defaults": {"n": 1, "p": 2, "L": 2, "m2": 0.0, "g0": 0.02, "branch": "+", "J_max": 64, "j_ab": 32,
                     "a": None, "b": None, "nu_mode": "tuned", "Omega": 2.0, "C_D": 4.0},
    },
    "predict": {
        "properties": {"cases": {"type": "array", "items": {
            "type": "object", "properties": {"n": {"type": "integer", "minimum": 0},
                                             "p": {"type": "integer", "minimum": 1}},
            "required": ["n", "p"], "additionalProperties": False}},
            "g0": {"type": ["number", "null"], "exclusiveMinimum": 0}},
        "defaults": {"cases": [{"n": 0, "p": 1}, {"n": 0, "p": 2}, {"n": 1, "p": 1}, {"n": 1, "p": 2},
                               {"n": 2, "p": 2}, {"n": 3, "p": 2}], "g0": None},
    },
    "mc-wsaw": {
        "properties": {"torus": _torus, "network": {"enum": ["watermelon", "star"]},
                       "g": {"type": "number", "minimum": 0}, "nu": {"type": "number", "exclusiveMinimum": 0},
                       "p": {"type": "integer", "minimum": 1}, "a": {"type": "integer", "minimum": 0},
                       "b": {"type": "integer", "minimum": 0}, "samples": {"type": "integer", "minimum": 16},
                       "n_batches": {"type": "integer", "minimum": 16}},
        "defaults": {"torus": {"d": 1, "L": 2, "N": 1}, "network": "watermelon", "g": 0.05, "nu": 1.0, "p": 1,
                     "a": 0, "b": 1, "samples": 100000, "n_batches": 16},
    },
    "mc-phi4": {
        "properties": {"torus": _torus, "n": {"type": "integer", "minimum": 1},
                       "g": {"type": "number", "minimum": 0}, "nu": _num,
                       "sweeps": {"type": "integer", "minimum": 1}, "therm": {"type": "integer", "minimum": 0},
                       "a": {"type": "integer", "minimum": 0}, "b": {"type": ["integer", "null"], "minimum": 0},
                       "chains": {"type": "integer", "minimum": 16}},
        "defaults": {"torus": {"d": 1, "L": 2, "N": 1}, "n": 1, "g": 0.5, "nu": 1.0, "sweeps": 100000,
                     "therm": 100, "a": 0, "b": None, "chains": 256},
    },
    "verify": {
        "properties": {"samples": {"type": "integer", "minimum": 16}, "sweeps": {"type": "integer", "minimum": 1}},
        "defaults": {"samples": 200000, "sweeps": 200000},
    },
}
for _s in SCHEMAS.values():
    _s["properties"]["seed"] = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}


class ConfigError(ValueError):
    pass


class DomainExitError(RuntimeError):
    pass


@dataclass
class Result:
    columns: list
    rows: list
    summary: dict
    status: int = EXIT_OK


def load_config(command: str, text: str | None) -> dict:
    """Parse and validate a config document, filling in defaults.

    Raises ConfigError with the line/column of a JSON syntax error or the
    field path of a schema violation.
    """
    entry = SCHEMAS[command]
    doc = {}
    if text:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    schema = {"type": "object", "properties": entry["properties"], "additionalProperties": False}
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        msgs = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("; ".join(msgs))
    cfg = json.loads(json.dumps(entry["defaults"]))
    cfg.update(doc)
    cfg.setdefault("seed", 0)
    return cfg


def _torus(cfg) -> TorusLattice:
    t = cfg["torus"]
    return TorusLattice(t["d"], t["L"], t["N"])


def _run_green(cfg, threads):
    m2 = cfg["m2"]
    if "torus" in cfg:
        lat = _torus(cfg)
        G = green_torus_exact(lat, m2).entries
        rows = [[a, b, repr(float(G[a, b]))] for a in range(lat.sites) for b in range(lat.sites)]
        return Result(["a", "b", "value"], rows, {"sites": lat.sites})
    d = cfg["d"]
    rows = []
    for x in cfg["points"]:
        if len(x) != d:
            raise ConfigError(f"points: {x} does not have {d} coordinates")
        val = green_zd(d, m2, x)
        r2 = float(np.sum(np.square(x)))
        rows.append([" ".join(map(str, x)), repr(val), repr(r2 ** ((d - 2) / 2) * val)])
    return Result(["x", "value", "scaled_value"], rows, {"d": d, "m2": m2})


def _run_bubble(cfg, threads):
    n, d = cfg["n"], cfg["d"]
    rows, logs, vals = [], [], []
    for m2 in cfg["m2"]:
        res = bubble(n, m2, d=d)
        rows.append([repr(m2), repr(math.log(1 / m2)), repr(res.value)])
        logs.append(math.log(1 / m2))
        vals.append(res.value)
    summary = {"b": bubble_constant(n)}
    if len(vals) >= 2:
        summary["slope"] = float(np.polyfit(logs, vals, 1)[0])
    return Result(["m2", "log_inv_m2", "bubble"], rows, summary)


def _run_decompose(cfg, threads):
    dec = decompose(cfg["d"], cfg["L"], cfg["m2"], cfg["J"], cache_dir=cfg["cache_dir"])
    b_log_L = bubble_constant(cfg["n"]) * math.log(cfg["L"])
    rows = []
    for j in range(dec.J + 1):
        beta = dec.beta(cfg["n"], j) if j < dec.J else math.nan
        rows.append([j, repr(float(dec.t[j])), repr(float(dec.c00[j])), repr(float(dec.w1[j])),
                     repr(float(dec.w2[j])), repr(beta), repr(beta / b_log_L)])
    return Result(["j", "t", "c00", "w1", "w2", "beta", "beta_ratio"], rows,
                  {"key": dec.key(), "cutoff_flag": dec.cutoff_flag})


def _run_flow(cfg, threads):
    J = cfg["J_max"]
    a, b, j_ab = cfg["a"], cfg["b"], cfg["j_ab"]
    if (a is None) != (b is None):
        raise ConfigError("a and b must be given together")
    if a is not None:
        j_ab = None
    dec = decompose(4, cfg["L"], cfg["m2"], max(J + 1, 20), radii=[0])
    tr = run_flow(cfg["n"], cfg["p"], cfg["L"], cfg["m2"], cfg["g0"], cfg["branch"], a, b, J, dec,
                  nu_mode=cfg["nu_mode"], Omega=cfg["Omega"], C_D=cfg["C_D"], j_ab=j_ab)
    rows = [[repr(float(tr[c][i])) if c != "j" else int(tr[c][i]) for c in tr.columns] for i in range(len(tr))]
    summary = {"exit_scale": tr.exit_scale, "exit_reason": tr.exit_reason, "trace_config": tr.config}
    return Result(list(tr.columns), rows, summary, EXIT_OK if tr.completed else EXIT_DOMAIN)


def _run_predict(cfg, threads):
    rows = []
    g0 = cfg["g0"]
    for case in cfg["cases"]:
        n, p = case["n"], case["p"]
        for branch in ("+", "-"):
            if branch == "-" and (n < 2 or p < 2):
                continue
            gamma = gamma_exponent(n, p, branch)
            row = [n, p, branch, repr(gamma), 2 * p, repr(2 * gamma), repr(gamma)]
            if g0 is not None:
                bg = bubble_constant(n) * g0
                row += [repr(math.factorial(p) / (2 * math.pi) ** (2 * p) * bg ** (-2 * gamma)),
                        repr(math.factorial(p) * bg ** (-gamma))]
            rows.append(row)
    cols = ["n", "p", "branch", "gamma", "distance_power", "log_power", "star_log_power"]
    if g0 is not None:
        cols += ["watermelon_amplitude", "star_amplitude"]
    return Result(cols, rows, {"g0": g0})


def _run_mc_wsaw(cfg, threads):
    lat = _torus(cfg)
    for k in ("a", "b"):
        if cfg[k] >= lat.sites:
            raise ConfigError(f"{k}: site {cfg[k]} outside a torus of {lat.sites} sites")
    if cfg["network"] == "watermelon":
        est = watermelon_mc(lat, cfg["g"], cfg["nu"], cfg["a"], cfg["b"], cfg["p"], cfg["samples"], cfg["seed"],
                            n_batches=cfg["n_batches"], threads=threads)
    else:
        est = star_mc(lat, cfg["g"], cfg["nu"], cfg["p"], cfg["samples"], cfg["seed"], a=cfg["a"],
                      n_batches=cfg["n_batches"], threads=threads)
    rows = [[cfg["network"], repr(est.mean), repr(est.stderr), est.count, est.seed]]
    return Result(["observable", "mean", "stderr", "count", "seed"], rows, {"warnings": list(est.warnings)})


def _run_mc_phi4(cfg, threads):
    lat = _torus(cfg)
    res = phi4_mc(lat, cfg["n"], cfg["g"], cfg["nu"], cfg["sweeps"], cfg["therm"], cfg["seed"], a=cfg["a"],
                  b=cfg["b"], chains=cfg["chains"], threads=threads)
    rows = [[name, repr(e.mean), repr(e.stderr), e.count, e.seed] for name, e in res.rows()]
    return Result(["observable", "mean", "stderr", "count", "seed"], rows,
                  {"acceptance": float(res.acceptance.mean())})


def verification_checks(samples: int, sweeps: int, seed: int, threads: int = 1):
    """(name, value, reference, tolerance, passed) for the oracle and identity suite."""
    out = []

    def add(name, value, ref, tol, passed=None):
        ok = abs(value - ref) <= tol if passed is None else passed
        out.append((name, float(value), float(ref), float(tol), bool(ok)))

    for L in (2, 3):
        lat = TorusLattice(1, L, 1)
        for nu in (0.5, 1.0, 2.0):
            for p in (1, 2):
                rep = representation_check(lat, 0.0, nu, p, use_oracle=False)
                worst = max(rep.checks, key=lambda c: abs(c.lhs - c.rhs))
                add(f"wick = walk expansion (sites={lat.sites}, nu={nu}, p={p})", worst.lhs, worst.rhs, 1e-10)
    two = TorusLattice(1, 2, 1)
    G = green_torus_exact(two, 1.0).entries
    add("wick = skeleton sum (2 sites, p=2)", wsaw_tiny_oracle(two, 0.0, 1.0, 0, 1, 2),
        wick_permanent(G, [0, 0], [1, 1]), 1e-10)
    add("two-site G_01(1)", G[0, 1], 0.4, 1e-14)
    # Watson's integral: G_00 on Z^3 at m2 = 0
    add("Z^3 G_00(0)", green_zd(3, 0.0, (0, 0, 0)), 0.25273100985866, 1e-11)
    dec = decompose(4, 2, 0.5, 8, radii=[0])
    add("slabs resum to G_00(0.5)", float(np.sum(dec.c00)), green_zd(4, 0.5, (0, 0, 0, 0)), 1e-12)
    add("one-site trace identity", 2 * phi4_onesite_oracle(2, 1.0, 1.0, "phi1_sq"),
        phi4_onesite_oracle(2, 1.0, 1.0, "phi_sq"), 1e-10)
    cc = phi4_onesite_oracle(2, 1.0, 1.0, "cross_cov")
    add("one-site cross covariance < 0", cc, 0.0, 0.0, cc < 0)
    orc = wsaw_tiny_oracle(two, 0.05, 1.0, 0, 1, 1)
    est = watermelon_mc(two, 0.05, 1.0, 0, 1, 1, samples, seed, threads=threads)
    if not est.within(orc):
        est = watermelon_mc(two, 0.05, 1.0, 0, 1, 1, 4 * samples, seed + 1, threads=threads)
    add("walk MC = skeleton oracle (g=0.05)", est.mean, orc, 3 * est.stderr)
    mc = phi4_mc(two, 1, 0.0, 1.0, sweeps, 100, seed, threads=threads)
    e = mc.two_point[1]
    add("phi4 MC two-point = G_01(1)", e.mean, 0.4, 3 * e.stderr)
    one = TorusLattice(1, 2, 0)
    mc = phi4_mc(one, 2, 1.0, 1.0, sweeps, 100, seed, threads=threads)
    e = mc["sq_cross"]
    add("phi4 MC cross covariance = oracle", e.mean, cc, 3 * e.stderr)
    return out


def _run_verify(cfg, threads):
    checks = verification_checks(cfg["samples"], cfg["sweeps"], cfg["seed"], threads)
    rows = [[name, repr(v), repr(r), repr(t), "pass" if ok else "fail"] for name, v, r, t, ok in checks]
    failed = [c[0] for c in checks if not c[4]]
    return Result(["check", "value", "reference", "tolerance", "status"], rows, {"failed": failed},
                  EXIT_VERIFY if failed else EXIT_OK)


RUNNERS = {
    "green": _run_green, "bubble": _run_bubble, "decompose": _run_decompose, "flow": _run_flow,
    "predict": _run_predict, "mc-wsaw": _run_mc_wsaw, "mc-phi4": _run_mc_phi4, "verify": _run_verify,
}


def render(result: Result, fmt: str, command: str, digest: str) -> str:
    if fmt == "json":
        doc = {"schema": TABLE_SCHEMA, "command": command, "config_sha256": digest,
               "columns": result.columns, "rows": result.rows, "summary": result.summary}
        return json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema={TABLE_SCHEMA}\n# command={command}\n# config_sha256={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    w.writerows(result.rows)
    return buf.getvalue()


def run(command: str, cfg: dict, out_dir: str, fmt: str = "csv", threads: int = 1) -> int:
    """Run one validated config and write its table and manifest; returns the exit code."""
    digest = config_hash({"command": command, **cfg})
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = RUNNERS[command](cfg, threads)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError) as e:
        result = Result([], [], {"error": f"{type(e).__name__}: {e}"}, EXIT_DOMAIN)
    table = render(result, fmt, command, digest)
    name = f"{command}.{fmt}"
    with open(os.path.join(out_dir, name), "w") as fh:
        fh.write(table)
    manifest = {
        "command": command, "config": cfg, "config_sha256": digest, "seed": cfg["seed"],
        "status": result.status, "summary": result.summary,
        "outputs": {name: hashlib.sha256(table.encode()).hexdigest()},
        "versions": {"phi4log": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1, default=str)
        fh.write("\n")
    if result.status != EXIT_OK:
        print(json.dumps({"status": result.status, "command": command, "summary": result.summary},
                         sort_keys=True, default=str), file=sys.stderr)
    return result.status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phi4log", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults are used for missing fields)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed, overrides the config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = None
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = load_config(args.command, text)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        return run(args.command, cfg, args.out, args.format, args.threads)
    except (ConfigError, OSError) as e:
        print(json.dumps({"status": EXIT_CONFIG, "error": str(e)}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
