"""Command-line front end: configuration files in, CSV + metadata bundles out.

    python3 -m ptguide run CONFIG [--out DIR] [--solver modematch|colloc|both] [--n1 N] [--n2 N] [--nmodes N]
    python3 -m ptguide plot BUNDLE --template eigencurve|complex_trajectory|tau_panel|wavefunction

Configurations are YAML.  Numeric fields take plain numbers, rationals such
as "1/3" and small expressions ("pi/2", "sqrt(2)", "alpha0 - 1") in which the
sweep variable and the profile's own fields may appear.  Exit status: 0 on
success, 2 for an invalid configuration, 3 for other solver errors, 4 for
convergence failures; failures also write ``error.json`` to the output
directory.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, asymptotics, modematch, tracking, transverse
from .errors import (
    ConfigInvalid,
    MissingField,
    NoConvergence,
    PTGuideError,
    SeriesNotConverged,
    StepRefinementExhausted,
)
from .profiles import GaussianPoly, SmoothProfile, SquareWellProfile, make_beta

KINDS = ("transverse", "match", "colloc", "tau", "classify", "sweep")
PROFILE_TYPES = ("constant", "square_well", "gaussian_poly")
TEMPLATES = ("eigencurve", "complex_trajectory", "tau_panel", "wavefunction")
EIGEN_COLUMNS = ("parameter", "branch", "re", "im", "solver", "resolution", "residual", "convergence")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONVERGENCE = 0, 2, 3, 4


# ---------------------------------------------------------------- numbers

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}
_CONSTS = {"pi": math.pi, "e": math.e}


def parse_number(value, names=None, field="value"):
    """Number from a YAML scalar: int, float, "1/3", "pi/2", or an expression in ``names``."""
    if isinstance(value, bool):
        raise ConfigInvalid("expected a number, got a boolean", field)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigInvalid(f"expected a number, got {type(value).__name__}", field)
    env = dict(_CONSTS)
    env.update(names or {})

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name) and node.id in env:
            return float(env[node.id])
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(ast.dump(node))

    try:
        return float(ev(ast.parse(value.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError, OverflowError) as exc:
        raise ConfigInvalid(f"cannot parse {value!r} as a number", field) from exc


def _require(mapping, key, path):
    if not isinstance(mapping, dict):
        raise ConfigInvalid("expected a mapping", path)
    if key not in mapping:
        raise ConfigInvalid("required field is missing", f"{path}.{key}" if path else key)
    return mapping[key]


# ---------------------------------------------------------------- config

def load_config(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read configuration: {exc}", "config") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"not valid YAML: {exc}", "config") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    """Schema check; raises ConfigInvalid with the offending field path."""
    if not isinstance(cfg, dict):
        raise ConfigInvalid("configuration must be a mapping", "config")
    kind = _require(cfg, "kind", "")
    if kind not in KINDS:
        raise ConfigInvalid(f"must be one of {', '.join(KINDS)}", "kind")
    prof = _require(cfg, "profile", "")
    ptype = _require(prof, "type", "profile")
    if ptype not in PROFILE_TYPES:
        raise ConfigInvalid(f"must be one of {', '.join(PROFILE_TYPES)}", "profile.type")
    for key in ("alpha0", "d"):
        _require(prof, key, "profile")
    if ptype == "square_well":
        for key in ("alpha_minus", "alpha_plus", "L_minus", "L_plus"):
            _require(prof, key, "profile")
    if ptype == "gaussian_poly":
        for key in ("epsilon", "coeffs", "w"):
            _require(prof, key, "profile")
        if not isinstance(prof["coeffs"], list) or not prof["coeffs"]:
            raise ConfigInvalid("must be a non-empty list", "profile.coeffs")
    if kind == "transverse":
        _require(cfg, "J", "")
    if kind == "sweep":
        sw = _require(cfg, "sweep", "")
        _require(sw, "parameter", "sweep")
        if "values" not in sw and not all(k in sw for k in ("start", "stop", "num")):
            raise ConfigInvalid("give either values or start/stop/num", "sweep")
    if kind == "tau" and "scan" in cfg:
        sc = cfg["scan"]
        _require(sc, "parameter", "scan")
        _require(sc, "values", "scan")
    # everything numeric must parse with the sweep/scan variable bound to a dummy value
    var = (cfg.get("sweep") or cfg.get("scan") or {}).get("parameter")
    build_profile(prof, {var: 1.0} if var else {})
    return cfg


def build_profile(prof, bindings=None):
    """Profile object from the ``profile`` mapping; ``bindings`` override or define names."""
    bindings = dict(bindings or {})
    names = dict(bindings)

    def num(key):
        if key in bindings:
            return float(bindings[key])
        v = parse_number(prof[key], names, f"profile.{key}")
        names[key] = v
        return v

    ptype = prof["type"]
    alpha0 = num("alpha0")
    d = num("d")
    if d <= 0:
        raise ConfigInvalid("strip width must be positive", "profile.d")
    if ptype == "constant":
        return SmoothProfile(alpha0, 0.0, GaussianPoly((0.0,), 1.0), d)
    if ptype == "square_well":
        vals = {k: num(k) for k in ("alpha_minus", "alpha_plus", "L_minus", "L_plus")}
        if not vals["L_minus"] < 0 < vals["L_plus"]:
            raise ConfigInvalid("need L_minus < 0 < L_plus", "profile.L_minus")
        return SquareWellProfile(alpha0, vals["alpha_minus"], vals["alpha_plus"], vals["L_minus"], vals["L_plus"], d)
    eps = num("epsilon")
    coeffs = [parse_number(c, names, f"profile.coeffs[{i}]") for i, c in enumerate(prof["coeffs"])]
    w = num("w")
    if w <= 0:
        raise ConfigInvalid("envelope width must be positive", "profile.w")
    shift = num("shift") if "shift" in prof else 0.0
    beta = make_beta({"kind": "gaussian_poly", "coeffs": coeffs, "w": w, "shift": shift})
    return SmoothProfile(alpha0, eps, beta, d)


def sweep_values(spec):
    if "values" in spec:
        return [parse_number(v, None, "sweep.values") for v in spec["values"]]
    start = parse_number(spec["start"], None, "sweep.start")
    stop = parse_number(spec["stop"], None, "sweep.stop")
    num = int(spec["num"])
    if num < 2:
        raise ConfigInvalid("need at least two points", "sweep.num")
    return np.linspace(start, stop, num).tolist()


# ---------------------------------------------------------------- output

def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


class ResultBundle:
    """Tables plus a metadata record; written as CSV files and ``metadata.json``."""

    def __init__(self, config, kind):
        self.config = config
        self.kind = kind
        self.tables = {}
        self.meta = {"kind": kind, "code_version": __version__, "config": config, "resolutions": {}, "results": {}}
        self.timings = {}

    def add_table(self, name, rows, columns):
        self.tables[name] = (rows, list(columns))

    def write(self, out):
        out = Path(out)
        files = {}
        for name, (rows, cols) in self.tables.items():
            atomic_write(out / f"{name}.csv", csv_text(rows, cols))
            files[name] = f"{name}.csv"
        meta = dict(self.meta)
        meta["files"] = files
        meta["timings"] = self.timings
        atomic_write(out / "metadata.json", json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
        return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o).__name__)


def _eig_rows(records, parameter=None, branch=None):
    rows = []
    for r in records:
        row = {"parameter": "" if parameter is None else parameter, "branch": "" if branch is None else branch}
        row.update(r.as_row())
        rows.append(row)
    return rows


# ---------------------------------------------------------------- experiments

def _solver_opts(cfg, overrides):
    s = dict(cfg.get("solver") or {})
    for k, v in overrides.items():
        if v is not None:
            s[k] = v
    return s


def _solvers_for(profile, opts):
    name = opts.get("name", "auto")
    if name == "auto":
        name = "modematch" if isinstance(profile, SquareWellProfile) else "colloc"
    names = ["modematch", "colloc"] if name == "both" else [name]
    out = []
    for n in names:
        if n == "modematch":
            if not isinstance(profile, SquareWellProfile):
                raise ConfigInvalid("mode matching needs a square-well profile", "solver.name")
            out.append(tracking.ModematchSolver(int(opts.get("nmodes", modematch.DEFAULT_N))))
        elif n == "colloc":
            grid = opts.get("grid", "matched")
            if grid == "matched":
                out.append(tracking.MatchedSolver(opts.get("n1"), int(opts.get("n2", 12))))
            elif grid in ("hermite", "fourier"):
                kw = {k: int(opts[k2]) for k, k2 in (("N1", "n1"), ("N2", "n2")) if k2 in opts}
                out.append(tracking.DenseSolver(grid, **kw))
            else:
                raise ConfigInvalid("must be matched, hermite or fourier", "solver.grid")
        else:
            raise ConfigInvalid("must be modematch, colloc or both", "solver.name")
    return out


def run_transverse(cfg, bundle, opts):
    prof = cfg["profile"]
    p = build_profile(prof)
    J = int(parse_number(cfg["J"], None, "J"))
    fam = transverse.build_family(p.alpha0, p.d, J)
    rows = [{"j": m.j, "mu": m.mu, "mu_sq": m.mu**2, "A_re": m.A.real, "A_im": m.A.imag} for m in fam.modes]
    bundle.add_table("transverse", rows, ("j", "mu", "mu_sq", "A_re", "A_im"))
    bundle.meta["results"] = {"mu0_sq": transverse.threshold(p.alpha0, p.d), "biorthonormality_residual": transverse.biorthonormality_residual(fam)}
    bundle.meta["resolutions"] = {"J": J}


def run_spectrum(cfg, bundle, opts):
    p = build_profile(cfg["profile"])
    solvers = _solvers_for(p, opts)
    rows = []
    found = {}
    for s in solvers:
        t = time.perf_counter()
        recs = s(p)
        bundle.timings[s.name] = time.perf_counter() - t
        found[s.name] = recs
        rows += _eig_rows(recs)
    bundle.add_table("eigenvalues", rows, EIGEN_COLUMNS)
    res = {"mu0_sq": transverse.threshold(p.alpha0, p.d), "count": {k: len(v) for k, v in found.items()}}
    if len(found) == 2:
        a, b = found.values()
        res["max_disagreement"] = max(
            (min((abs(x.value - y.value) / max(1.0, abs(x.value)) for y in b), default=math.inf) for x in a), default=0.0
        )
    bundle.meta["results"] = res
    bundle.meta["resolutions"] = {s.name: list(found[s.name][0].resolution) if found[s.name] else [] for s in solvers}
    if cfg.get("eigenfunction") and isinstance(p, SquareWellProfile) and found.get("modematch"):
        ef = modematch.reconstruct_eigenfunction(p, found["modematch"][0], int(opts.get("nmodes", modematch.DEFAULT_N)))
        x1 = np.linspace(p.L_minus - 6, p.L_plus + 6, 121)
        x2 = np.linspace(0, p.d, 41)
        vals = ef(x1[:, None], x2[None, :])
        erows = [
            {"x1": float(a), "x2": float(b), "re": float(vals[i, j].real), "im": float(vals[i, j].imag)}
            for i, a in enumerate(x1)
            for j, b in enumerate(x2)
        ]
        bundle.add_table("eigenfunction", erows, ("x1", "x2", "re", "im"))


def _weak_input(p, cfg):
    jmax = int(parse_number(cfg.get("J_max", asymptotics.J_MAX), None, "J_max"))
    return asymptotics.WeakCouplingInput.from_profile(p, J_max=jmax)


def run_tau(cfg, bundle, opts):
    prof = cfg["profile"]
    scan = cfg.get("scan")
    rows = []
    if scan:
        var = scan["parameter"]
        values = [parse_number(v, None, "scan.values") for v in scan["values"]]
    else:
        var, values = None, [None]
    for v in values:
        p = build_profile(prof, {var: v} if var else {})
        inp = _weak_input(p, cfg)
        tau, tail = asymptotics.tau_constant(inp)
        rows.append({"parameter": "" if v is None else v, "tau": tau, "tail": tail, "regime": inp.regime})
    bundle.add_table("tau", rows, ("parameter", "tau", "tail", "regime"))
    taus = [r["tau"] for r in rows]
    bundle.meta["results"] = {
        "parameter": var,
        "sign_changes": int(np.sum(np.diff(np.sign(taus)) != 0)) if len(taus) > 1 else 0,
    }


def run_classify(cfg, bundle, opts):
    p = build_profile(cfg["profile"])
    inp = _weak_input(p, cfg)
    case = asymptotics.classify(inp)
    bundle.add_table("classify", [{"label": case.label, "moment": case.moment, "tau": case.tau, "tail": case.tail}], ("label", "moment", "tau", "tail"))
    bundle.meta["results"] = {"label": case.label, "moment": case.moment, "tau": case.tau}


def run_sweep(cfg, bundle, opts):
    prof = cfg["profile"]
    sw = cfg["sweep"]
    var = sw["parameter"]
    grid = sweep_values(sw)
    family = lambda v: build_profile(prof, {var: v})
    p0 = family(grid[0])
    solvers = _solvers_for(p0, opts)
    solver = solvers[0]
    t = time.perf_counter()
    curve = tracking.sweep(family, grid, solver, parameter=var)
    bundle.timings["sweep"] = time.perf_counter() - t
    rows = []
    for p, recs, ids in zip(curve.values, curve.records, curve.branch_ids):
        for r, b in zip(recs, ids):
            rows += _eig_rows([r], p, b)
    bundle.add_table("eigenvalues", rows, EIGEN_COLUMNS)
    bundle.add_table("events", [e.as_row() for e in curve.events], ("parameter", "kind", "branches", "lo", "hi"))
    res = {
        "mu0_sq": curve.mu0_sq,
        "parameter": var,
        "events": [e.kind for e in curve.events],
        "pt_broken_intervals": tracking.detect_pt_breaking(curve),
    }
    # weak-coupling prediction over the sweep when the sweep variable is epsilon
    if var == "epsilon" and isinstance(p0, SmoothProfile):
        try:
            inp = asymptotics.WeakCouplingInput.from_profile(p0)
            case = asymptotics.classify(inp)
            res["case"] = case.label
            if case.has_eigenvalue:
                order = "eps3" if case.label == "B1" else "eps4"
                arows = [{"parameter": e, "prediction": asymptotics.lambda_prediction(inp, e, order, case)} for e in grid]
                bundle.add_table("asymptote", arows, ("parameter", "prediction"))
        except PTGuideError:
            pass
    bundle.meta["results"] = res
    bundle.meta["resolutions"] = {"solver": solver.name}


RUNNERS = {
    "transverse": run_transverse,
    "match": run_spectrum,
    "colloc": run_spectrum,
    "tau": run_tau,
    "classify": run_classify,
    "sweep": run_sweep,
}


def run(config, out=None, solver=None, n1=None, n2=None, nmodes=None):
    """Run one experiment and write its bundle; returns the bundle."""
    cfg = config if isinstance(config, dict) else load_config(config)
    validate_config(cfg)
    kind = cfg["kind"]
    overrides = {"name": solver, "n1": n1, "n2": n2, "nmodes": nmodes}
    if kind == "colloc" and solver is None and "name" not in (cfg.get("solver") or {}):
        overrides["name"] = "colloc"
    if kind == "match" and solver is None and "name" not in (cfg.get("solver") or {}):
        overrides["name"] = "modematch"
    opts = _solver_opts(cfg, overrides)
    bundle = ResultBundle(cfg, kind)
    t = time.perf_counter()
    RUNNERS[kind](cfg, bundle, opts)
    bundle.timings["total"] = time.perf_counter() - t
    out = out or cfg.get("output") or "results"
    bundle.write(out)
    return bundle


def _exit_code(exc):
    if isinstance(exc, ConfigInvalid):
        return EXIT_CONFIG
    if isinstance(exc, (NoConvergence, SeriesNotConverged, StepRefinementExhausted)):
        return EXIT_CONVERGENCE
    return EXIT_SOLVER


def error_record(exc):
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "field": getattr(exc, "field", None),
        "exit_code": _exit_code(exc),
    }


# ---------------------------------------------------------------- plots

_HEADER = '''"""Plot generated from a result bundle; run it from inside the bundle directory."""
import csv
import json
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("metadata.json") as fh:
    meta = json.load(fh)


def read(name):
    with open(name) as fh:
        return list(csv.DictReader(fh))

'''

_EIGENCURVE = '''rows = read("eigenvalues.csv")
mu0_sq = meta["results"]["mu0_sq"]
branches = defaultdict(list)
for r in rows:
    branches[r["branch"]].append((float(r["parameter"]), float(r["re"]), float(r["im"])))
fig, ax = plt.subplots(figsize=(6, 4))
for b, pts in sorted(branches.items()):
    pts.sort()
    # solid where the eigenvalue is real, dotted (real part) where it belongs to a complex pair
    for k in range(len(pts) - 1):
        (p0, x0, y0), (p1, x1, y1) = pts[k], pts[k + 1]
        style = ":" if max(abs(y0), abs(y1)) > 1e-8 else "-"
        ax.plot([p0, p1], [x0, x1], style, color="C%d" % (int(b) % 10))
ASYMPTOTE
ax.axhline(mu0_sq, color="k", lw=3)
ax.set_xlabel(meta["results"].get("parameter", "parameter"))
ax.set_ylabel("Re lambda")
fig.tight_layout()
fig.savefig("eigencurve.pdf")
'''

_ASYMPTOTE = '''try:
    arows = read("asymptote.csv")
    ax.plot([float(r["parameter"]) for r in arows], [float(r["prediction"]) for r in arows], "m--", label="asymptotics")
    ax.legend()
except FileNotFoundError:
    pass'''

_TRAJECTORY = '''rows = read("eigenvalues.csv")
mu0_sq = meta["results"]["mu0_sq"]
branches = defaultdict(list)
for r in rows:
    branches[r["branch"]].append((float(r["parameter"]), float(r["re"]), float(r["im"])))
fig, ax = plt.subplots(figsize=(6, 4))
xmax = mu0_sq
for b, pts in sorted(branches.items()):
    pts.sort()
    ax.plot([p[1] for p in pts], [p[2] for p in pts], ".-", ms=3, color="C%d" % (int(b) % 10))
    xmax = max(xmax, max(p[1] for p in pts))
# the continuous spectrum [mu0^2, infinity) on the real axis
ax.plot([mu0_sq, xmax + 0.1 * (abs(xmax) + 1)], [0, 0], "k-", lw=4)
ax.plot([mu0_sq], [0], "k|", ms=14)
ax.set_xlabel("Re lambda")
ax.set_ylabel("Im lambda")
fig.tight_layout()
fig.savefig("complex_trajectory.pdf")
'''

_TAU = '''rows = read("tau.csv")
x = [float(r["parameter"]) for r in rows]
y = [float(r["tau"]) for r in rows]
fig, ax = plt.subplots(figsize=(5, 4))
ax.plot(x, y, "b.-")
ax.axhline(0.0, color="k", lw=0.8)
ax.set_xlabel(meta["results"].get("parameter") or "parameter")
ax.set_ylabel("tau")
fig.tight_layout()
fig.savefig("tau_panel.pdf")
'''

_WAVE = '''rows = read("eigenfunction.csv")
x1 = sorted({float(r["x1"]) for r in rows})
x2 = sorted({float(r["x2"]) for r in rows})
ix = {v: i for i, v in enumerate(x1)}
iy = {v: i for i, v in enumerate(x2)}
re = [[0.0] * len(x1) for _ in x2]
im = [[0.0] * len(x1) for _ in x2]
for r in rows:
    i, j = ix[float(r["x1"])], iy[float(r["x2"])]
    re[j][i] = float(r["re"])
    im[j][i] = float(r["im"])
fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
for ax, data, name in zip(axes, (re, im), ("Re", "Im")):
    c = ax.contourf(x1, x2, data, 30)
    fig.colorbar(c, ax=ax)
    ax.set_ylabel("x2")
    ax.set_title(name + " Psi")
axes[-1].set_xlabel("x1")
fig.tight_layout()
fig.savefig("wavefunction.pdf")
'''

_NEEDS = {
    "eigencurve": ("eigenvalues", ("parameter", "branch", "re", "im"), ("mu0_sq",)),
    "complex_trajectory": ("eigenvalues", ("parameter", "branch", "re", "im"), ("mu0_sq",)),
    "tau_panel": ("tau", ("parameter", "tau"), ()),
    "wavefunction": ("eigenfunction", ("x1", "x2", "re", "im"), ()),
}


def emit_plot_script(bundle_dir, template):
    """Text of a matplotlib script for ``template`` that reads the bundle's CSV files."""
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}")
    bundle_dir = Path(bundle_dir)
    meta_path = bundle_dir / "metadata.json"
    if not meta_path.exists():
        raise MissingField("metadata.json")
    meta = json.loads(meta_path.read_text())
    table, cols, results = _NEEDS[template]
    path = bundle_dir / f"{table}.csv"
    if not path.exists():
        raise MissingField(f"{table}.csv")
    with open(path) as fh:
        header = next(csv.reader(fh), [])
        has_rows = next(csv.reader(fh), None) is not None
    for c in cols:
        if c not in header:
            raise MissingField(f"{table}.csv:{c}")
    if not has_rows:
        raise MissingField(f"{table}.csv:rows")
    for key in results:
        if key not in meta.get("results", {}):
            raise MissingField(f"results.{key}")
    body = {
        "eigencurve": _EIGENCURVE.replace("ASYMPTOTE", _ASYMPTOTE),
        "complex_trajectory": _TRAJECTORY,
        "tau_panel": _TAU,
        "wavefunction": _WAVE,
    }[template]
    return _HEADER + body


# ---------------------------------------------------------------- entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="ptguide", description="Point spectrum of PT-symmetric Robin waveguides")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--solver", choices=("modematch", "colloc", "both"))
    r.add_argument("--n1", type=int)
    r.add_argument("--n2", type=int)
    r.add_argument("--nmodes", type=int)
    p = sub.add_parser("plot", help="write a plot script for a result bundle")
    p.add_argument("bundle")
    p.add_argument("--template", required=True, choices=TEMPLATES)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        try:
            text = emit_plot_script(args.bundle, args.template)
        except MissingField as exc:
            print(json.dumps({"error": "MissingField", "field": exc.field}), file=sys.stderr)
            return EXIT_CONFIG
        out = Path(args.bundle) / f"plot_{args.template}.py"
        atomic_write(out, text)
        print(out)
        return EXIT_OK
    out = args.out
    try:
        cfg = load_config(args.config)
        out = out or cfg.get("output") or "results"
        run(cfg, out, args.solver, args.n1, args.n2, args.nmodes)
    except PTGuideError as exc:
        rec = error_record(exc)
        print(json.dumps(rec), file=sys.stderr)
        try:
            atomic_write(Path(out or "results") / "error.json", json.dumps(rec, indent=2) + "\n")
        except OSError:
            pass
        return rec["exit_code"]
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
