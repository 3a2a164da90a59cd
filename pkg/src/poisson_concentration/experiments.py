"""Experiment runners: one function per experiment kind, plus built-in recipes.

Each runner takes a resolved configuration and returns an
:class:`ExperimentResult` holding CSV tables, assertions and optional SVG
figures; :func:`write_outputs` puts them on disk. CSV contents depend only on
the configuration and seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds, entropy, onepoint
from .config import parse_text
from .cylinders import (BaseDistribution, BaseShape, CylinderModelSpec, Window, compare_bounds,
                        cylinder_proxy_certificates, run_cylinder_concentration, sample_cylinders)
from .errors import ConfigurationError
from .geometry.bodies import ConvexBodySpec
from .geometry.polytopes import PolytopeFunctional, run_polytope_certificates, run_polytope_concentration
from .streams import RandomStream
from .svg import line_plot, tail_plot


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    kind: str
    config: dict
    tables: dict = field(default_factory=dict)      # file name -> list of row dicts
    assertions: list = field(default_factory=list)
    figures: dict = field(default_factory=dict)     # file name -> svg text
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed: bool, detail: str = ""):
        self.assertions.append(Assertion(name, bool(passed), detail))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


# constants

def run_constants(cfg: dict, stream: RandomStream, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult("constants", cfg)
    res.tables["kappa.csv"] = [{"p": p, "kappa_p": bounds.kappa_p(p)} for p in cfg["p_grid"]]
    res.tables["constants.csv"] = [
        {"name": "kappa", "value": bounds.KAPPA},
        {"name": "kappa_p_near_1", "value": bounds.kappa_p(1.0 + 1e-12)},
        {"name": "c_one_sided", "value": bounds.C_ONE_SIDED},
        {"name": "c_two_sided", "value": bounds.C_TWO_SIDED},
        {"name": "inverse_c", "value": 1.0 / bounds.C_ONE_SIDED},
        {"name": "t_min", "value": bounds.T_MIN},
        {"name": "tail_bound_at_t_min_L1", "value": bounds.tail_bound(bounds.T_MIN, bounds.BoundSpec("upper_tail", 1.0))},
    ]
    grid = np.linspace(1.0 + 1e-6, 1e6, cfg["monotone_grid_size"])
    vals = np.array([bounds.kappa_p(p) for p in grid])
    res.check("kappa_2 == 1", bounds.kappa_p(2.0) == 1.0, repr(bounds.kappa_p(2.0)))
    res.check("kappa_p near 1 -> 1/2", abs(bounds.kappa_p(1.0 + 1e-12) - 0.5) < 1e-5)
    res.check("|kappa_1e6 - 1.270747| < 1e-5", abs(bounds.kappa_p(1e6) - 1.270747) < 1e-5)
    res.check("kappa_p strictly increasing", bool(np.all(np.diff(vals) > 0)))
    res.check("tail bound at 4 sqrt(kappa) with L=1 is 1/4",
              bounds.tail_bound(bounds.T_MIN, bounds.BoundSpec("upper_tail", 1.0)) == 0.25)
    if cfg["plot"]:
        ps = np.linspace(1.01, 50, 200)
        res.figures["kappa.svg"] = line_plot([("kappa_p", ps, [bounds.kappa_p(p) for p in ps])],
                                             title="kappa_p", xlabel="p", ylabel="kappa_p", log_y=False)
    return res


# one-point inequality suite

def inequality_rows(lam_grid, r_grid, p_grid, functions, checks) -> list[dict]:
    rows = []

    def add(report, lam, name, r="", p=""):
        rows.append({"check": report.name, "f": name, "lam": lam, "r": r, "p": p,
                     "lhs": report.lhs, "rhs": report.rhs, "slack": report.slack,
                     "vacuous": bool(report.details.get("vacuous", False)), "passed": report.passed})

    for name in functions:
        for lam in lam_grid:
            m = onepoint.model(name, lam)
            if "log" in checks:
                add(entropy.check_log_sobolev(m), lam, name)
            for r in r_grid:
                if "phi_r" in checks:
                    add(entropy.check_phi_r_sobolev(m, r), lam, name, r=r)
                if "beckner" in checks:
                    add(entropy.check_beckner(m, r), lam, name, r=r)
            for p in p_grid:
                if "recursive_lp" in checks:
                    add(bounds.recursive_lp_check(m, p), lam, name, p=p)
                if "moments" in checks:
                    for rep in bounds.verify_moment_bound(m, p).values():
                        add(rep, lam, name, p=p)
    return rows


def run_inequality_suite(cfg: dict, stream: RandomStream, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult("inequality-suite", cfg)
    known = set(onepoint.BATTERY) | set(onepoint.EXTRA)
    for name in cfg["functions"]:
        if name not in known:
            raise ConfigurationError(f"unknown function {name!r}; choose from {sorted(known)}", field="functions")
    unknown = set(cfg["checks"]) - {"phi_r", "log", "beckner", "recursive_lp", "moments"}
    if unknown:
        raise ConfigurationError(f"unknown checks {sorted(unknown)}", field="checks")
    rows = inequality_rows(cfg["lam_grid"], cfg["r_grid"], cfg["p_grid"], cfg["functions"], cfg["checks"])
    res.tables["inequalities.csv"] = rows
    worst = min((r["slack"] for r in rows), default=0.0)
    failed = [r for r in rows if not r["passed"]]
    res.check("all inequalities hold with slack >= -1e-10", not failed,
              f"{len(rows)} cells, min slack {worst!r}")
    return res


# tail verification on the one-point space

def run_tail_verify(cfg: dict, stream: RandomStream, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult("tail-verify", cfg)
    m = onepoint.model(cfg["function"], cfg["lam"])
    m.check_truncation()
    tail = cfg["tail"]
    proxy = m.proxies()["total" if tail == "two_sided" else ("plus" if tail == "upper_tail" else "minus")]
    L = cfg["L"]
    if L is None:
        L = float(proxy.max())
        res.info["L_source"] = "maximum of the proxy over the truncated range 0..K"
        if L <= 0:
            raise ConfigurationError("proxy vanishes identically; set L explicitly", field="L")
    else:
        res.check("configured L dominates the proxy on 0..K", float(proxy.max()) <= L * (1 + 1e-12),
                  f"max proxy {float(proxy.max())!r}, L {L!r}")
    spec = bounds.BoundSpec(tail, L)
    t_grid = [t for t in cfg["t_grid"] if t >= spec.t_min]
    report = bounds.verify_tail(m, spec, cfg["n_reps"], stream, t_grid)
    res.tables["tail.csv"] = report.rows()
    res.info["L"] = L
    res.check("no tail violations at 99% confidence", report.passed, f"violations at t={report.violations}")
    if cfg["plot"]:
        res.figures["tail.svg"] = tail_plot(report, f"{cfg['function']} lam={cfg['lam']}")
    return res


# polytopes

def body_from_config(body: dict) -> ConvexBodySpec:
    kind = body["kind"]
    if kind == "ball":
        return ConvexBodySpec.ball(body["dim"], body["radius"])
    if kind == "cube":
        return ConvexBodySpec.cube(body["dim"], body["side"])
    if kind == "ellipsoid":
        return ConvexBodySpec.ellipsoid(body["semi_axes"])
    return ConvexBodySpec.polytope(body["vertices"])


def run_polytope(cfg: dict, stream: RandomStream, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult("polytope", cfg)
    body = body_from_config(cfg["body"])
    fns = [PolytopeFunctional.parse(f) for f in cfg["functionals"]]
    for fn in fns:
        fn.check_body(body)
    if cfg["n_cert"]:
        summary = run_polytope_certificates(body, cfg["model"], fns, cfg["gamma"], cfg["n_cert"],
                                            stream.child(0), cfg["n_insert"], workers)
        res.tables["certificates.csv"] = [
            {"functional": f.label, "n_reps": summary.n_reps, "n_passed": summary.n_passed[f.label],
             "bound_plus": f.bound_plus(body), "bound_minus": f.bound_minus(body, cfg["gamma"]),
             "max_ratio_plus": summary.max_ratio_plus[f.label],
             "max_ratio_minus": summary.max_ratio_minus[f.label],
             "mean_value": summary.mean_value[f.label]} for f in fns]
        res.check("proxy certificates hold on every replication", summary.passed,
                  "; ".join(f"rep {i} {lab}: {v}" for i, lab, v in summary.failures[:5]))
    for j, fn in enumerate(fns):
        if not cfg["t_grid"]:
            continue
        report = run_polytope_concentration(body, cfg["model"], fn, cfg["gamma"], cfg["n_reps"],
                                            [t for t in cfg["t_grid"] if t >= bounds.T_MIN],
                                            stream.child(1 + j), tail=cfg["tail"], workers=workers)
        res.tables[f"tail_{fn.label}.csv"] = report.rows()
        res.check(f"no {cfg['tail']} violations for {fn.label}", report.passed,
                  f"violations at t={report.violations}")
        if cfg["plot"]:
            res.figures[f"tail_{fn.label}.svg"] = tail_plot(report, f"{fn.label} of Poisson polytope")
    return res


# cylinders

def cylinder_spec_from_config(cfg: dict) -> CylinderModelSpec:
    base = cfg["base"]
    if base["kind"] == "mixture":
        shapes = [BaseShape(k, s) for k, s in zip(base["kinds"], base["sizes"])]
        total = sum(base["weights"])
        dist = BaseDistribution.mixture(shapes, [w / total for w in base["weights"]])
    else:
        dist = BaseDistribution((BaseShape(base["kind"], base["size"]),))
    win = cfg["window"]
    if win["kind"] == "ball":
        window = Window.ball(cfg["d"], win["radius"])
    else:
        if win["sides"] is None:
            raise ConfigurationError("missing required key: sides in [window]", field="sides")
        window = Window.box(win["sides"])
    return CylinderModelSpec(cfg["d"], cfg["k"], cfg["gamma"], dist, window, cfg["direction"])


def run_cylinder(cfg: dict, stream: RandomStream, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult("cylinder", cfg)
    spec = cylinder_spec_from_config(cfg)
    upper, lower = spec.bound_scales()
    res.info.update({"mean_formula": spec.mean_volume(), "L_upper": upper, "L_lower": lower})
    if cfg["n_cert"]:
        rows = []
        for i in range(cfg["n_cert"]):
            gen = stream.child(0).child(i).generator()
            real = sample_cylinders(spec, gen)
            rep = cylinder_proxy_certificates(real, cfg["n_points"], cfg["n_mu_samples"], gen)
            rows.append({"rep": i, "n_cylinders": len(real), "v_plus": rep.v_plus, "v_plus_se": rep.v_plus_se,
                         "bound_plus": rep.bound_plus, "v_minus": rep.v_minus, "v_minus_se": rep.v_minus_se,
                         "bound_minus": rep.bound_minus, "fubini_estimate": rep.fubini_estimate,
                         "fubini_se": rep.fubini_se, "fubini_exact": rep.fubini_exact,
                         "passed": rep.passed})
        res.tables["certificates.csv"] = rows
        res.check("proxy certificates hold on every realization", all(r["passed"] for r in rows))
    if cfg["t_grid"]:
        report = run_cylinder_concentration(spec, cfg["n_reps"], [t for t in cfg["t_grid"] if t >= bounds.T_MIN],
                                            stream.child(1), tail=cfg["tail"], n_points=cfg["n_points"],
                                            workers=workers)
        res.tables["tail.csv"] = report.rows()
        res.check(f"no {cfg['tail']} violations", report.passed, f"violations at t={report.violations}")
        if cfg["plot"]:
            res.figures["tail.svg"] = tail_plot(report, "covered volume in window")
    if cfg["compare"]:
        table = compare_bounds(spec)
        res.tables["comparison.csv"] = table.rows()
        res.check("elementary inequality holds on [0, 100] to 1e-12", table.elementary_holds,
                  f"min gap {table.elementary_min_gap!r}")
        res.check("comparison bound never exceeds the proxy bound", table.comparison_never_larger,
                  f"{len(table.t)} values of t, {table.n_asserted} with t >= 4 sqrt(kappa)")
        res.check("constant chain (2/3)(2p+1) <= 2 < 1/c", table.constant_chain_holds,
                  repr(table.constant_chain))
    return res


RUNNERS = {
    "constants": run_constants,
    "inequality-suite": run_inequality_suite,
    "tail-verify": run_tail_verify,
    "polytope": run_polytope,
    "cylinder": run_cylinder,
}


def run_experiment(cfg: dict, seed: Optional[int] = None, workers: int = 1) -> ExperimentResult:
    cfg = dict(cfg)
    if seed is not None:
        cfg["master_seed"] = int(seed)
    stream = RandomStream(cfg["master_seed"])
    start = time.perf_counter()
    res = RUNNERS[cfg["kind"]](cfg, stream, workers)
    res.info["elapsed_seconds"] = time.perf_counter() - start
    return res


def write_outputs(res: ExperimentResult, out_dir) -> list[Path]:
    """Write CSVs, SVGs, ``summary.json`` and ``resolved_config.json``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in res.tables.items():
        path = out / name
        path.write_text(rows_to_csv(rows), encoding="utf-8")
        written.append(path)
    for name, svg in res.figures.items():
        path = out / name
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    summary = {
        "kind": res.kind,
        "passed": res.passed,
        "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail} for a in res.assertions],
        "info": {k: (v if not isinstance(v, float) or math.isfinite(v) else repr(v)) for k, v in res.info.items()},
        "files": sorted(p.name for p in written),
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    path = out / "resolved_config.json"
    path.write_text(json.dumps(res.config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    return written


# Built-in recipes, one per statement in scope, named by what they check.

RECIPES: dict[str, tuple[str, str]] = {
    "kappa-constants": ("Constants kappa_p, kappa, c and the tail threshold", """
kind = "constants"
master_seed = 1
"""),
    "sobolev-family": ("Phi_r-Sobolev, modified log-Sobolev and Beckner inequalities on the one-point space", """
kind = "inequality-suite"
master_seed = 1
checks = ["phi_r", "log", "beckner"]
"""),
    "recursive-lp": ("Recursive L^p estimate for the positive deviation", """
kind = "inequality-suite"
master_seed = 1
checks = ["recursive_lp"]
p_grid = [2.0, 2.5, 3.0, 4.0, 6.0]
"""),
    "moment-bounds": ("One- and two-sided moment bounds from the variance proxies", """
kind = "inequality-suite"
master_seed = 1
checks = ["moments"]
p_grid = [2.0, 3.0, 4.0, 8.0]
"""),
    "proxy-tail-bound": ("Sub-Gaussian tail bound under an almost-sure proxy bound (harmonic sums, L = 1)", """
kind = "tail-verify"
master_seed = 1
function = "harmonic"
lam = 5.0
n_reps = 20000
t_grid = [4.509096656792177, 5.0, 6.0]
tail = "upper_tail"
"""),
    "polytope-volume": ("Concentration of the normalised volume of a Poisson polytope (ball, inside points)", """
kind = "polytope"
master_seed = 1
model = "In"
gamma = 100.0
functionals = ["zeta"]
n_reps = 500
n_cert = 100
t_grid = [4.509096656792177, 5.0]
[body]
kind = "ball"
dim = 2
"""),
    "polytope-intrinsic": ("Proxy bounds for intrinsic volumes of Poisson polytopes (ball boundary points)", """
kind = "polytope"
master_seed = 1
model = "Bd"
gamma = 30.0
functionals = ["V1", "V2", "V3"]
n_reps = 200
n_cert = 100
t_grid = [4.509096656792177]
[body]
kind = "ball"
dim = 3
"""),
    "cylinder-volume": ("Covered volume of a Poisson cylinder model and the comparison with a Bennett-type bound", """
kind = "cylinder"
master_seed = 1
d = 2
k = 1
gamma = 1.0
n_reps = 500
n_points = 5000
n_cert = 10
t_grid = [4.509096656792177, 5.0]
compare = true
[base]
kind = "ball"
size = 0.2
[window]
kind = "ball"
radius = 2.0
"""),
    "boolean-volume": ("Covered volume of a planar Boolean model of discs", """
kind = "cylinder"
master_seed = 1
d = 2
k = 0
gamma = 50.0
n_reps = 500
n_points = 5000
n_cert = 10
t_grid = [4.509096656792177]
[base]
kind = "ball"
size = 0.1
[window]
kind = "ball"
radius = 1.0
"""),
}


def list_experiments() -> str:
    width = max(len(n) for n in RECIPES)
    return "\n".join(f"{name:<{width}}  {desc}" for name, (desc, _) in RECIPES.items()) + "\n"


def recipe_config(name: str) -> dict:
    if name not in RECIPES:
        raise ConfigurationError(f"unknown recipe {name!r}")
    return parse_text(RECIPES[name][1])


def recipe_text(name: str) -> str:
    if name not in RECIPES:
        raise ConfigurationError(f"unknown recipe {name!r}")
    return RECIPES[name][1].lstrip()
