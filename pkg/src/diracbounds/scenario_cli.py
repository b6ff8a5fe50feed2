"""JSON scenarios: load, run the pipeline, write reports.

A scenario names either a spherically symmetric data family (with a
domain ``[rho_min, rho_b]``) or a revolution surface, plus the tasks to
run.  Tasks execute in the order constraints, horizons, jang, spectrum,
verify; a failing task records a structured error and never hides the
outputs of the others.

Exit codes: 0 all bounds hold, 1 numerical failure, 2 a bound check
failed, 3 a hypothesis is violated, 4 input error.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from . import bounds
from . import dirac_spectrum as ds
from .errors import (InvalidParameterError, NumericalFailure, PreconditionViolation,
                     ScenarioError)
from .initial_data import FAMILIES, check_dec, constraint_fields, make_family
from .jang import boundary_identity_check, solve_jang_dirichlet
from .sphere_slices import horizon_scan, slices_csv

EXIT_OK, EXIT_NUMERIC, EXIT_BOUND, EXIT_HYPOTHESIS, EXIT_INPUT = 0, 1, 2, 3, 4

TASK_ORDER = ("constraints", "horizons", "jang", "spectrum", "verify")
DATA_ONLY_TASKS = ("constraints", "horizons", "jang")
SURFACE_KINDS = ("sphere", "spheroid", "csv", "euclidean_spheroid", "hyperbolic_spheroid")

FAMILY_PARAMS = {
    "euclidean": {},
    "hyperbolic_unit": {},
    "hyperbolic": {"radius": 1.0},
    "schwarzschild_isotropic": {"m": 1.0},
    "round_s3": {"a0": 1.0},
    "maximal_slice_custom": {},
    "custom": {},
}
SURFACE_PARAMS = {
    "sphere": ("r",),
    "spheroid": ("a", "c"),
    "euclidean_spheroid": ("a", "c"),
    "hyperbolic_spheroid": ("a", "c"),
    "csv": ("path",),
}

DEFAULT_N = 1024
DEFAULT_K_MAX = Fraction(7, 2)

_number = {"type": "number"}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "data", "tasks"],
    "properties": {
        "schema": {"const": 1},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "data": {
            "type": "object",
            "oneOf": [
                {"required": ["family"], "not": {"required": ["surface"]}},
                {"required": ["surface"], "not": {"required": ["family"]}},
            ],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": list(FAMILIES)},
                "params": {"type": "object", "additionalProperties": _number},
                "csv": {"type": "string"},
                "rho_max": {"type": "number", "exclusiveMinimum": 0},
                "surface": {"enum": list(SURFACE_KINDS)},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "a": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "path": {"type": "string"},
            },
        },
        "domain": {
            "type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 2, "maxItems": 2,
        },
        "tasks": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"enum": list(TASK_ORDER)},
        },
        "numeric": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 64},
                "k_max": {"oneOf": [{"type": "number"},
                                    {"type": "string", "pattern": r"^\d+/2$"}]},
                "tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
    },
    "if": {"properties": {"data": {"required": ["family"]}}},
    "then": {"required": ["domain"]},
}


def _pointer(parts):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _schema_error(err):
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
            return ScenarioError(f"missing required property {missing[0]!r}", _pointer(parts))
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            parts.append(extra[0])
            return ScenarioError(f"unknown key {extra[0]!r}", _pointer(parts))
    return ScenarioError(err.message, _pointer(parts))


@dataclass(frozen=True)
class Scenario:
    name: str
    data: dict
    domain: tuple
    tasks: tuple
    n: int = DEFAULT_N
    k_max: Fraction = DEFAULT_K_MAX
    tol: float = None
    base_dir: str = "."
    description: str = ""

    @property
    def is_surface(self):
        return "surface" in self.data

    @property
    def rho_b(self):
        return None if self.domain is None else self.domain[1]

    def to_json(self):
        out = {"schema": 1, "name": self.name, "data": dict(self.data),
               "tasks": list(self.tasks),
               "numeric": {"n": self.n, "k_max": str(self.k_max), "tol": self.tol}}
        if self.domain is not None:
            out["domain"] = list(self.domain)
        return out

    def build_data(self):
        d = self.data
        params = {**FAMILY_PARAMS[d["family"]], **d.get("params", {})}
        rho_max = d.get("rho_max", self.domain[1])
        grid = np.linspace(self.domain[0], rho_max, self.n)
        if d["family"] in ("custom", "maximal_slice_custom"):
            params["csv"] = str(Path(self.base_dir) / d["csv"])
        return make_family(d["family"], params, grid)

    def build_surface(self):
        d = self.data
        kind = d["surface"]
        m = max(2 * self.n, 2048)
        if kind == "sphere":
            return ds.sphere_profile(d["r"], n=m)
        if kind == "spheroid":
            return ds.spheroid_profile(d["a"], d["c"], n=m)
        if kind == "euclidean_spheroid":
            return bounds.euclidean_spheroid(d["a"], d["c"], n=m)
        if kind == "hyperbolic_spheroid":
            return bounds.hyperbolic_spheroid(d["a"], d["c"], n=m)
        return ds.load_profile_csv(str(Path(self.base_dir) / d["path"]))


def _as_k_max(value):
    k = Fraction(value).limit_denominator(1000) if not isinstance(value, str) else Fraction(value)
    if k.denominator != 2:
        raise ScenarioError(f"k_max={value} is not a half-integer", "/numeric/k_max")
    return k


def validate_scenario(raw, base_dir="."):
    """Check a parsed scenario document and fill in defaults."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    data = dict(raw["data"])
    domain = tuple(raw["domain"]) if "domain" in raw else None
    tasks = tuple(t for t in TASK_ORDER if t in raw["tasks"])
    numeric = raw.get("numeric", {})
    if "family" in data:
        fam = data["family"]
        allowed = FAMILY_PARAMS[fam]
        for key in data.get("params", {}):
            if key not in allowed:
                raise ScenarioError(f"family {fam!r} takes no parameter {key!r}",
                                    f"/data/params/{key}")
        for key in ("surface", "r", "a", "c", "path"):
            if key in data:
                raise ScenarioError(f"key {key!r} only applies to surfaces", f"/data/{key}")
        if fam in ("custom", "maximal_slice_custom") and "csv" not in data:
            raise ScenarioError(f"family {fam!r} needs a csv file", "/data/csv")
        if "csv" in data and fam not in ("custom", "maximal_slice_custom"):
            raise ScenarioError("csv input needs a custom family", "/data/csv")
        if not domain[0] < domain[1]:
            raise ScenarioError("domain must satisfy rho_min < rho_b", "/domain")
        if data.get("rho_max", domain[1]) < domain[1]:
            raise ScenarioError("domain extends beyond the grid (rho_b > rho_max)", "/domain/1")
    else:
        kind = data["surface"]
        for key in ("params", "csv", "rho_max", "r", "a", "c", "path"):
            if key in data and key not in SURFACE_PARAMS[kind]:
                raise ScenarioError(f"surface {kind!r} takes no key {key!r}", f"/data/{key}")
        for key in SURFACE_PARAMS[kind]:
            if key not in data:
                raise ScenarioError(f"surface {kind!r} needs {key!r}", f"/data/{key}")
        for i, t in enumerate(raw["tasks"]):
            if t in DATA_ONLY_TASKS:
                raise ScenarioError(f"task {t!r} needs initial data, not a surface",
                                    f"/tasks/{i}")
        if domain is not None:
            raise ScenarioError("surface scenarios take no domain", "/domain")
    k_max = _as_k_max(numeric.get("k_max", DEFAULT_K_MAX))
    return Scenario(raw["name"], data, domain, tasks, int(numeric.get("n", DEFAULT_N)), k_max,
                    numeric.get("tol"), str(base_dir), raw.get("description", ""))


def load_scenario(path):
    """Parse and validate a scenario file (or ``builtin:NAME``)."""
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in BUILTIN_SCENARIOS:
            raise ScenarioError(f"unknown built-in scenario {name!r}")
        return validate_scenario(BUILTIN_SCENARIOS[name])
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return validate_scenario(raw, base_dir=Path(path).parent)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


@dataclass
class RunReport:
    scenario: dict
    tasks: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    artifacts: dict = field(default_factory=dict)

    def to_json(self):
        return _clean({"version": __version__, "scenario": self.scenario,
                       "tasks": self.tasks, "exit_code": self.exit_code})

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _error_entry(exc):
    if isinstance(exc, PreconditionViolation):
        return {"type": "hypothesis_violation", "hypothesis": exc.hypothesis,
                "message": str(exc), "witness": exc.witness}, EXIT_HYPOTHESIS
    if isinstance(exc, NumericalFailure):
        return {"type": "numerical_failure", "message": str(exc),
                "trace": exc.trace}, EXIT_NUMERIC
    if isinstance(exc, (InvalidParameterError, ScenarioError)):
        return {"type": "input_error", "message": str(exc)}, EXIT_INPUT
    raise exc


_SEVERITY = (EXIT_OK, EXIT_NUMERIC, EXIT_BOUND, EXIT_HYPOTHESIS, EXIT_INPUT)


def _worse(a, b):
    return a if _SEVERITY.index(a) >= _SEVERITY.index(b) else b


def _spectrum_csv(spec):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "eigenvalue"])
    for k, vals in spec.per_mode.items():
        for v in vals:
            w.writerow([k, repr(float(v))])
    return buf.getvalue()


def _constraints_task(sc, d, report):
    cf = constraint_fields(d)
    tol = bounds.dec_tolerance(d)
    dec = check_dec(d, tol=tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "R", "mu", "J_rad", "dec_margin"])
    for row in zip(cf.rho, cf.R, cf.mu, cf.J_rad, cf.dec_margin):
        w.writerow([repr(float(x)) for x in row])
    report.artifacts["constraints.csv"] = buf.getvalue()
    return {"dec": dec.to_json(), "dec_tol": tol, "max_abs_R": float(np.max(np.abs(cf.R))),
            "min_mu": float(np.min(cf.mu)), "max_abs_J": float(np.max(np.abs(cf.J_rad))),
            "n": d.n}


def _horizons_task(sc, d, report):
    roots = horizon_scan(d)
    report.artifacts["slices.csv"] = slices_csv(d, sc.tol)
    inside = [h for h in roots if h.rho < sc.rho_b - 1e-10]
    return {"horizons": [{"rho": h.rho, "expansions": list(h.expansions)} for h in roots],
            "interval": [float(d.rho[0]), float(d.rho[-1])],
            "no_horizon_in_domain": not inside}


def _jang_task(sc, d, report):
    sol = solve_jang_dirichlet(d, sc.rho_b, n=sc.n)
    report.artifacts["jang.csv"] = sol.to_csv()
    out = sol.summary()
    try:
        out["boundary_identity"] = boundary_identity_check(d, sol)
    except PreconditionViolation as exc:
        out["boundary_identity"] = {"error": str(exc), "hypothesis": exc.hypothesis}
    return out, sol


def _spectrum_task(sc, surface, d, report):
    if surface is None:
        # round boundary sphere of the data scenario
        r_b = _area_radius_at(d, sc.rho_b)
        surface = ds.sphere_profile(r_b)
    s = surface.surface if isinstance(surface, bounds.ModelSurface) else surface
    spec = ds.dirac_spectrum(s, k_max=sc.k_max, n=sc.n)
    report.artifacts["spectrum.csv"] = _spectrum_csv(spec)
    return dict(spec.to_json(), surface=s.name)


def _area_radius_at(d, rho):
    return float(CubicSpline(d.rho, d.r)(rho))


def run(sc):
    """Execute the scenario tasks; never raises for task-level failures."""
    report = RunReport(sc.to_json())
    code = EXIT_OK
    try:
        d = None if sc.is_surface else sc.build_data()
        surface = sc.build_surface() if sc.is_surface else None
    except (InvalidParameterError, ScenarioError, OSError) as exc:
        msg = exc.strerror if isinstance(exc, OSError) else str(exc)
        for t in sc.tasks:
            report.tasks[t] = {"status": "error",
                               "error": {"type": "input_error", "message": msg}}
        report.exit_code = EXIT_INPUT
        return report
    jang_sol, jang_failed = None, None
    for task in sc.tasks:
        try:
            if task == "constraints":
                result = _constraints_task(sc, d, report)
            elif task == "horizons":
                result = _horizons_task(sc, d, report)
            elif task == "jang":
                result, jang_sol = _jang_task(sc, d, report)
            elif task == "spectrum":
                result = _spectrum_task(sc, surface, d, report)
            else:
                if sc.is_surface:
                    br = bounds.verify(surface=surface, k_max=sc.k_max, n=sc.n)
                else:
                    br = bounds.verify(d, sc.rho_b, k_max=sc.k_max, n=sc.n,
                                       jang=jang_failed is None, jang_solution=jang_sol)
                result = br.to_json()
                if jang_failed is not None:
                    result["upstream"] = {"task": "jang", "error": jang_failed}
                if not br.all_hold:
                    code = _worse(code, EXIT_BOUND)
            report.tasks[task] = {"status": "ok", "result": result}
        except (PreconditionViolation, NumericalFailure, InvalidParameterError) as exc:
            entry, c = _error_entry(exc)
            report.tasks[task] = {"status": "error", "error": entry}
            code = _worse(code, c)
            if task == "jang":
                jang_failed = entry
    report.exit_code = code
    return report


def emit(report, out_dir, fmt="json"):
    """Write ``report.json`` (and, for ``csv``, the per-field CSV tables).

    Returns the list of written paths.
    """
    if fmt not in ("json", "csv", "csv-bundle"):
        raise ScenarioError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    files = {"report.json": report.dumps()}
    if fmt != "json":
        files.update(report.artifacts)
    for name in sorted(files):
        p = out / name
        with open(p, "w", newline="") as fh:
            fh.write(files[name])
        written.append(str(p))
    return written


# Model cases shipped with the tool.
BUILTIN_SCENARIOS = {
    "euclidean_ball": {
        "schema": 1, "name": "euclidean_ball", "data": {"family": "euclidean"},
        "domain": [0.01, 1.0], "tasks": list(TASK_ORDER)},
    "cap_r0.5": {
        "schema": 1, "name": "cap_r0.5",
        "data": {"family": "hyperbolic", "params": {"radius": 0.5}},
        "domain": [0.005, 0.5], "tasks": list(TASK_ORDER)},
    "cap_r1": {
        "schema": 1, "name": "cap_r1", "data": {"family": "hyperbolic_unit"},
        "domain": [0.01, 1.0], "tasks": list(TASK_ORDER)},
    "cap_r2": {
        "schema": 1, "name": "cap_r2",
        "data": {"family": "hyperbolic", "params": {"radius": 2.0}},
        "domain": [0.02, 2.0], "tasks": list(TASK_ORDER)},
    "schwarzschild_outside": {
        "schema": 1, "name": "schwarzschild_outside",
        "data": {"family": "schwarzschild_isotropic", "params": {"m": 1.0}},
        "domain": [0.6, 2.0], "tasks": list(TASK_ORDER)},
    "schwarzschild_horizon": {
        "schema": 1, "name": "schwarzschild_horizon",
        "data": {"family": "schwarzschild_isotropic", "params": {"m": 1.0}},
        "domain": [0.4, 2.0], "tasks": list(TASK_ORDER)},
    "round_s3": {
        "schema": 1, "name": "round_s3",
        "data": {"family": "round_s3", "params": {"a0": 2.0}},
        "domain": [0.01, 1.5], "tasks": list(TASK_ORDER)},
    "spheroid_1_1.5": {
        "schema": 1, "name": "spheroid_1_1.5",
        "data": {"surface": "spheroid", "a": 1.0, "c": 1.5}, "tasks": ["spectrum", "verify"]},
    "spheroid_1_2": {
        "schema": 1, "name": "spheroid_1_2",
        "data": {"surface": "spheroid", "a": 1.0, "c": 2.0}, "tasks": ["spectrum", "verify"]},
    "euclidean_round": {
        "schema": 1, "name": "euclidean_round",
        "data": {"surface": "euclidean_spheroid", "a": 1.0, "c": 1.0}, "tasks": ["verify"]},
    "euclidean_prolate": {
        "schema": 1, "name": "euclidean_prolate",
        "data": {"surface": "euclidean_spheroid", "a": 1.0, "c": 1.5}, "tasks": ["verify"]},
    "hyperbolic_round": {
        "schema": 1, "name": "hyperbolic_round",
        "data": {"surface": "hyperbolic_spheroid", "a": 0.3, "c": 0.3}, "tasks": ["verify"]},
    "hyperbolic_oblate": {
        "schema": 1, "name": "hyperbolic_oblate",
        "data": {"surface": "hyperbolic_spheroid", "a": 0.3, "c": 0.2}, "tasks": ["verify"]},
}


def _override(sc, grid=None, tol=None, tasks=None):
    kw = dict(sc.__dict__)
    if grid is not None:
        kw["n"] = int(grid)
    if tol is not None:
        kw["tol"] = float(tol)
    if tasks is not None:
        if sc.is_surface and any(t in DATA_ONLY_TASKS for t in tasks):
            raise ScenarioError("this command needs a data scenario", "/data")
        kw["tasks"] = tuple(t for t in TASK_ORDER if t in tasks)
    return Scenario(**kw)


_COMMAND_TASKS = {
    "verify": None,
    "constraints": ("constraints",),
    "scan-horizons": ("horizons",),
    "jang": ("jang",),
}


def _parse_params(items):
    out = {}
    for item in items or ():
        key, _, value = item.partition("=")
        try:
            out[key] = float(value)
        except ValueError:
            raise ScenarioError(f"parameter {item!r} is not KEY=NUMBER", "/data") from None
    return out


def _spectrum_scenario(args):
    if (args.profile is None) == (args.family is None):
        raise ScenarioError("give either a profile CSV or --family", "/data")
    if args.profile is not None:
        data = {"surface": "csv", "path": str(Path(args.profile).resolve())}
    else:
        data = {"surface": args.family, **_parse_params(args.param)}
    raw = {"schema": 1, "name": "spectrum", "data": data, "tasks": ["spectrum"]}
    if args.k_max is not None:
        raw["numeric"] = {"k_max": args.k_max}
    return validate_scenario(raw)


def build_parser():
    p = argparse.ArgumentParser(prog="diracbounds",
                                description="Dirac eigenvalue bounds for spherically "
                                            "symmetric initial data")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="directory for report.json and CSV tables")
        sp.add_argument("--grid", type=int, help="grid points (overrides numeric.n)")
        sp.add_argument("--tol", type=float, help="horizon classification tolerance")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    for name in _COMMAND_TASKS:
        sp = sub.add_parser(name)
        sp.add_argument("scenario", help="scenario JSON file or builtin:NAME")
        common(sp)
    sp = sub.add_parser("spectrum")
    sp.add_argument("profile", nargs="?", help="two-column t,f CSV profile")
    sp.add_argument("--family", choices=SURFACE_KINDS[:2] + SURFACE_KINDS[3:],
                    help="built-in surface family")
    sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                    help="surface parameter, e.g. r=1 or a=1 c=1.5")
    sp.add_argument("--k-max", dest="k_max", help="largest |k| (half-integer)")
    common(sp)
    sub.add_parser("list", help="list the built-in scenarios")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(BUILTIN_SCENARIOS):
            print(name)
        return EXIT_OK
    try:
        if args.command == "spectrum":
            sc = _spectrum_scenario(args)
            tasks = None
        else:
            sc = load_scenario(args.scenario)
            tasks = _COMMAND_TASKS[args.command]
        sc = _override(sc, args.grid, args.tol, tasks)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = run(sc)
    if args.out:
        try:
            emit(report, args.out, args.format)
        except OSError as exc:
            print(f"error: cannot write to {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(report.dumps())
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
