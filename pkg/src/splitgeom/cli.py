"""Command-line verification driver.

Subcommands:

* ``verify``  -- run identity checks for one scenario (by catalog name or
  JSON config path) or for the whole catalog (``--all``), write a
  deterministic JSON report (and optional per-point CSV), exit 0 only if
  every check passes.
* ``catalog`` -- list built-in scenarios.
* ``report``  -- diff two report files (timings ignored).

Config files are JSON, schema-validated, unknown keys rejected::

    {
      "scenario": "twisted_torus_k3",        // name, inline object, or list
      "identities": ["main", "aux:2"],       // optional filter
      "samples": 200, "seed": 7,
      "grid": 32,                            // int or per-axis list
      "tolerances": {"pointwise": 1e-8, "integral": 1e-10, "predicate": 1e-9},
      "out": "report.json", "csv": "fields.csv", "threads": 2
    }

Command-line flags shadow config values.  Reports are byte-identical for
identical config and seed; wall-times go to a sidecar ``<out>.timing.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import zlib

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from .chart import Axis, ChartManifold, GeometryError
from .expr import parse_expr
from .hypersurface import (
    GapError,
    HypersurfaceScenario,
    codazzi_checks,
    dperp_integrability,
    hypersurface_catalog,
    hypersurface_identity,
    principal_bundle,
    shape_data,
)
from .identities import (
    CheckReport,
    Tolerances,
    available_identities,
    integral_checks_batch,
    pointwise_fields,
)
from .scenarios import (
    WarpedSpec,
    build_twisted_torus,
    build_warped,
    build_warped_twisted,
    kproduct_catalog,
    warped_checks,
)
from .splitting import SplitContext, SplitStructure, pair_predicates

DEFAULT_SAMPLES = 100
HYPERSURFACE_SAMPLE_CAP = 20


class ConfigError(ValueError):
    pass


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {},
        "identities": {"type": "array", "items": {"type": "string"}},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "grid": {"anyOf": [{"type": "integer", "minimum": 4},
                           {"type": "array", "items": {"type": "integer", "minimum": 4}}]},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pointwise": {"type": "number"},
                "integral": {"type": "number"},
                "predicate": {"type": "number"},
                "codazzi": {"type": "number"},
                "surface_identity": {"type": "number"},
                "kmix": {"type": "number"},
            },
        },
        "out": {"type": "string"},
        "csv": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
    },
}

_INLINE_SCHEMAS = {
    "twisted_torus": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "k", "dims"],
        "properties": {
            "kind": {"const": "twisted_torus"},
            "name": {"type": "string"},
            "k": {"type": "integer", "minimum": 2},
            "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "twist": {"type": "string"},
        },
    },
    "warped": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "base_dim", "fiber_dims", "warps"],
        "properties": {
            "kind": {"const": "warped"},
            "name": {"type": "string"},
            "base_dim": {"type": "integer", "minimum": 1},
            "fiber_dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "warps": {"type": "array", "items": {"type": "string"}},
        },
    },
    "warped_twisted": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind"],
        "properties": {
            "kind": {"const": "warped_twisted"},
            "name": {"type": "string"},
            "u": {"type": "string"},
            "twist": {"type": "string"},
        },
    },
    "hypersurface": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "axes", "immersion", "metric", "ambient_curv",
                     "expected_k", "expected_dims"],
        "properties": {
            "kind": {"const": "hypersurface"},
            "name": {"type": "string"},
            "axes": {"type": "array", "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["lo", "hi"],
                "properties": {"lo": {"type": "number"}, "hi": {"type": "number"},
                               "periodic": {"type": "boolean"}},
            }},
            "immersion": {"type": "array", "items": {"type": "string"}},
            "metric": {"type": "array",
                       "items": {"type": "array", "items": {"type": "string"}}},
            "ambient_curv": {"type": "integer", "enum": [0, 1]},
            "expected_k": {"type": "integer", "minimum": 1},
            "expected_dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "normal_flip": {"type": "boolean"},
            "sample_box": {"type": "array",
                           "items": {"type": "array", "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2}},
            "gap_threshold": {"type": "number"},
        },
    },
}


def full_catalog():
    cat = {}
    cat.update(kproduct_catalog())
    cat.update(hypersurface_catalog())
    return cat


def build_inline_scenario(spec):
    kind = spec.get("kind")
    if kind not in _INLINE_SCHEMAS:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    if jsonschema is not None:
        try:
            jsonschema.validate(spec, _INLINE_SCHEMAS[kind])
        except jsonschema.ValidationError as e:
            raise ConfigError(f"invalid inline scenario: {e.message}")
    if kind == "twisted_torus":
        return build_twisted_torus(spec["k"], tuple(spec["dims"]),
                                   twist=spec.get("twist", "sin(x{n})"),
                                   name=spec.get("name"))
    if kind == "warped":
        return build_warped(WarpedSpec(spec["base_dim"], tuple(spec["fiber_dims"]),
                                       tuple(spec["warps"])),
                            name=spec.get("name", "warped"))
    if kind == "warped_twisted":
        kwargs = {}
        if "u" in spec:
            kwargs["u_src"] = spec["u"]
        if "twist" in spec:
            kwargs["twist_src"] = spec["twist"]
        return build_warped_twisted(name=spec.get("name", "warped_twisted"), **kwargs)
    # hypersurface
    axes = [Axis(a["lo"], a["hi"], a.get("periodic", True)) for a in spec["axes"]]
    n = len(axes)
    chart = ChartManifold(axes, spec["metric"], name=spec.get("name", "hypersurface"))
    immersion = [parse_expr(src, n) for src in spec["immersion"]]
    return HypersurfaceScenario(
        name=spec.get("name", "hypersurface"), chart=chart, immersion=immersion,
        ambient_curv=spec["ambient_curv"], expected_k=spec["expected_k"],
        expected_dims=tuple(spec["expected_dims"]),
        normal_flip=spec.get("normal_flip", False),
        sample_box=[tuple(b) for b in spec["sample_box"]] if "sample_box" in spec else None,
        gap_threshold=spec.get("gap_threshold"),
    )


def resolve_scenarios(entry):
    if isinstance(entry, list):
        out = []
        for item in entry:
            out.extend(resolve_scenarios(item))
        return out
    if isinstance(entry, str):
        cat = full_catalog()
        if entry not in cat:
            raise ConfigError(
                f"unknown scenario {entry!r}; catalog: {', '.join(sorted(cat))}")
        return [cat[entry]()]
    if isinstance(entry, dict):
        return [build_inline_scenario(entry)]
    raise ConfigError("scenario must be a name, an object, or a list of those")


def scenario_rng(seed, name):
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def _tolerances_from(config_tols):
    tols = Tolerances()
    extra = {"codazzi": 1e-5, "kmix": 1e-8}
    if config_tols:
        for key in ("pointwise", "integral", "predicate"):
            if key in config_tols:
                setattr(tols, key, float(config_tols[key]))
        for key in ("codazzi", "kmix", "surface_identity"):
            if key in config_tols:
                extra[key] = float(config_tols[key])
    return tols, extra


def run_scenario(scn, samples, seed, grid_override, tols, extra_tols, threads,
                 identities_filter=None, csv_rows=None):
    """All checks for one scenario; returns the list of CheckReports."""
    rng = scenario_rng(seed, scn.name)
    reports = []
    if scn.kind == "hypersurface":
        reports.extend(_run_hypersurface(scn, samples, rng, tols, extra_tols,
                                         identities_filter, csv_rows))
        return reports

    pts = scn.sample(samples, rng)
    idents = available_identities(scn.k)
    if identities_filter is not None:
        from .identities import _parse_identity
        for name in identities_filter:
            _parse_identity(name, scn.k)  # raises ValueError on bad names
        idents = [i for i in identities_filter]

    t0 = time.perf_counter()
    fields = pointwise_fields(scn.chart, scn.split, pts, idents, threads=threads)
    elapsed = time.perf_counter() - t0
    flat = pts.reshape(-1, pts.shape[-1])
    for ident in idents:
        res = fields[ident]
        max_term = fields["max_term:" + ident]
        rel = np.abs(res) / (1.0 + max_term)
        idx = int(np.argmax(np.abs(res)))
        verdict = "pass" if float(np.max(rel)) <= tols.pointwise else "fail"
        reports.append(CheckReport(
            identity=ident, scenario=scn.name, kind="pointwise",
            n_points=int(res.size), tolerance=tols.pointwise, verdict=verdict,
            max_abs_residual=float(np.max(np.abs(res))),
            max_rel_residual=float(np.max(rel)),
            note=f"worst point {flat[idx].tolist()}",
            wall_time=elapsed / len(idents)))
        if csv_rows is not None:
            store = csv_rows.setdefault(scn.name, {"points": flat, "columns": {}})
            store["columns"][ident] = res

    if scn.closed and not scn.meta.get("no_integral", False):
        grid = grid_override or scn.meta.get("integral_grid", 16)
        integrals = [i for i in idents if i != "smix_lemma"]
        if scn.k == 3 and (identities_filter is None or
                           "ck2_k3_display" in identities_filter):
            integrals.append("ck2_k3_display")
        if integrals:
            reports.extend(integral_checks_batch(
                scn.chart, scn.split, grid, integrals, scenario=scn.name,
                tol=tols, threads=threads))

    if scn.kind == "warped" and identities_filter is None:
        t1 = time.perf_counter()
        res = warped_checks(scn, pts)
        keys = ["mean_curvature", "base_totally_geodesic"]
        if res["sec2_exact"]:
            keys += ["div_mean_curvature", "smix_warped"]
        for key in keys:
            verdict = "pass" if res[key] <= tols.predicate else "fail"
            reports.append(CheckReport(
                identity=f"warped_{key}", scenario=scn.name, kind="predicate",
                n_points=samples, tolerance=tols.predicate, verdict=verdict,
                max_abs_residual=res[key], wall_time=time.perf_counter() - t1))
        t1 = time.perf_counter()
        worst_h = 0.0
        ok = True
        for i in range(1, scn.k + 1):
            for j in range(i + 1, scn.k + 1):
                pred = pair_predicates(scn.chart, scn.split, i, j, pts,
                                       tol=tols.predicate)
                worst_h = max(worst_h, pred["sup_h_cross"], pred["sup_t_cross"])
                ok = ok and pred["mixed_tg"] and pred["mixed_int"]
        reports.append(CheckReport(
            identity="warped_mixed_pairs", scenario=scn.name, kind="predicate",
            n_points=samples, tolerance=tols.predicate,
            verdict="pass" if ok else "fail", max_abs_residual=worst_h,
            wall_time=time.perf_counter() - t1))
    return reports


def _run_hypersurface(scn, samples, rng, tols, extra_tols, identities_filter,
                      csv_rows):
    count = min(samples, HYPERSURFACE_SAMPLE_CAP)
    pts = scn.sample(count, rng)
    reports = []
    wanted = identities_filter

    def selected(name):
        return wanted is None or name in wanted

    if selected("kmix_pairs"):
        t0 = time.perf_counter()
        b = principal_bundle(scn, pts)
        frame_values = np.swapaxes(b["Y"], -1, -2)
        split = SplitStructure(scn.expected_dims, frame=None, name="eigen")
        ctx = SplitContext(scn.chart, split, pts, frame_values=frame_values)
        worst = 0.0
        c = float(scn.ambient_curv)
        k = scn.expected_k
        for i in range(1, k + 1):
            for j in range(i + 1, k + 1):
                got = ctx.mixed_curvature(i, j)
                ni, nj = scn.expected_dims[i - 1], scn.expected_dims[j - 1]
                want = ni * nj * (c + b["mu"][..., i - 1] * b["mu"][..., j - 1])
                worst = max(worst, float(np.max(np.abs(got - want))))
        reports.append(CheckReport(
            identity="kmix_pairs", scenario=scn.name, kind="pointwise",
            n_points=count, tolerance=extra_tols["kmix"],
            verdict="pass" if worst <= extra_tols["kmix"] else "fail",
            max_abs_residual=worst, wall_time=time.perf_counter() - t0))

    if selected("codazzi"):
        t0 = time.perf_counter()
        worst = 0.0
        for p in pts:
            res = codazzi_checks(scn, p)
            worst = max(worst, res["total_symmetry"], res["eigen_offdiag"],
                        res["eigen_diag"], res["exchange"])
        reports.append(CheckReport(
            identity="codazzi", scenario=scn.name, kind="pointwise",
            n_points=count, tolerance=extra_tols["codazzi"],
            verdict="pass" if worst <= extra_tols["codazzi"] else "fail",
            max_abs_residual=worst, wall_time=time.perf_counter() - t0))

    if selected("surface_identity"):
        t0 = time.perf_counter()
        tol = extra_tols.get("surface_identity",
                             1e-6 if scn.expected_k == 2 else 1e-4)
        worst = 0.0
        rows = []
        for p in pts:
            out = hypersurface_identity(scn, p)
            worst = max(worst, abs(out["residual"]))
            rows.append(out["residual"])
        reports.append(CheckReport(
            identity="surface_identity", scenario=scn.name, kind="pointwise",
            n_points=count, tolerance=tol,
            verdict="pass" if worst <= tol else "fail",
            max_abs_residual=worst, wall_time=time.perf_counter() - t0))
        if csv_rows is not None:
            store = csv_rows.setdefault(scn.name,
                                        {"points": pts, "columns": {}})
            store["columns"]["surface_identity"] = np.asarray(rows)

    if scn.expected_k >= 3 and selected("dperp"):
        t0 = time.perf_counter()
        res = dperp_integrability(scn, pts)
        reports.append(CheckReport(
            identity="dperp_integrability", scenario=scn.name, kind="predicate",
            n_points=count, tolerance=0.0,
            verdict="pass" if res["flags_agree"] else "fail",
            max_abs_residual=res["sup_cal"],
            note=f"cal_zero={res['cal_zero']} bracket_zero={res['bracket_zero']}",
            wall_time=time.perf_counter() - t0))

    if scn.closed and scn.chart.dim == 2 and selected("total_curvature"):
        t0 = time.perf_counter()
        from .chart import integrate

        def k_field(qq):
            # intrinsic curvature of a surface in a space form
            return scn.ambient_curv + np.linalg.det(shape_data(scn, qq)["A"])

        grid = scn.meta.get("integral_grid", [32, 8])
        total = integrate(scn.chart, k_field, grid)
        norm = integrate(scn.chart, lambda q: np.abs(k_field(q)), grid)
        area = integrate(scn.chart, lambda q: np.ones(q.shape[0]), grid)
        denom = max(norm, area)
        ratio = abs(total) / denom if denom > 0 else 0.0
        reports.append(CheckReport(
            identity="total_curvature", scenario=scn.name, kind="integral",
            n_points=int(np.prod(grid)), tolerance=tols.integral,
            verdict="pass" if ratio <= tols.integral else "fail",
            integral_value=total, normalizer=denom, integral_ratio=ratio,
            grid=list(grid), wall_time=time.perf_counter() - t0))
    return reports


# -- report emission ------------------------------------------------------------

def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def write_reports(reports, out_path):
    with open(out_path, "w") as fh:
        fh.write(reports_to_json(reports))
    timing = {f"{r.scenario}:{r.identity}": r.wall_time for r in reports}
    with open(out_path + ".timing.json", "w") as fh:
        json.dump(timing, fh, indent=2)
        fh.write("\n")


def write_csv(csv_rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for name in sorted(csv_rows):
            store = csv_rows[name]
            pts = store["points"]
            cols = sorted(store["columns"])
            header = ["scenario"] + [f"x{a + 1}" for a in range(pts.shape[-1])] + cols
            writer.writerow(header)
            flat = pts.reshape(-1, pts.shape[-1])
            for i in range(flat.shape[0]):
                row = [name] + [repr(float(v)) for v in flat[i]]
                for c in cols:
                    row.append(repr(float(store["columns"][c].reshape(-1)[i])))
                writer.writerow(row)


# -- entry points -----------------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if jsonschema is not None:
        try:
            jsonschema.validate(config, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"config rejected: {e.message}")
    return config


def cmd_verify(args):
    config = {}
    if args.scenario and (os.path.sep in args.scenario
                          or args.scenario.endswith(".json")
                          or os.path.exists(args.scenario)):
        config = load_config(args.scenario)
    elif args.scenario:
        config = {"scenario": args.scenario}
    elif not getattr(args, "all", False):
        raise ConfigError("need --scenario NAME|CONFIG.json or --all")

    if getattr(args, "all", False):
        config["scenario"] = sorted(full_catalog())

    # flag overrides shadow config values
    if args.grid is not None:
        config["grid"] = args.grid
    if args.tol is not None:
        config.setdefault("tolerances", {})
        config["tolerances"]["pointwise"] = args.tol
        config["tolerances"]["integral"] = args.tol
    if args.seed is not None:
        config["seed"] = args.seed
    if args.samples is not None:
        config["samples"] = args.samples
    if args.out is not None:
        config["out"] = args.out
    if args.csv is not None:
        config["csv"] = args.csv
    if args.threads is not None:
        config["threads"] = args.threads

    scenarios = resolve_scenarios(config.get("scenario"))
    samples = config.get("samples", DEFAULT_SAMPLES)
    seed = config.get("seed", 0)
    grid_override = config.get("grid")
    threads = config.get("threads",
                         int(os.environ.get("SPLITGEOM_THREADS", "1")))
    tols, extra_tols = _tolerances_from(config.get("tolerances"))
    identities_filter = config.get("identities")

    csv_rows = {} if config.get("csv") else None
    all_reports = []
    for scn in scenarios:
        try:
            reports = run_scenario(scn, samples, seed, grid_override, tols,
                                   extra_tols, threads,
                                   identities_filter=identities_filter,
                                   csv_rows=csv_rows)
        except ValueError as e:
            raise ConfigError(str(e))
        for rep in reports:
            status = rep.verdict.upper()
            detail = ""
            if rep.max_abs_residual is not None:
                detail += f" max_abs={rep.max_abs_residual:.3e}"
            if rep.integral_ratio is not None:
                detail += f" integral_ratio={rep.integral_ratio:.3e}"
            if rep.verdict == "fail" and rep.note:
                detail += f" ({rep.note})"
            print(f"{status:4s} {rep.scenario}:{rep.identity}{detail}")
        all_reports.extend(reports)

    if config.get("out"):
        write_reports(all_reports, config["out"])
    if csv_rows is not None:
        write_csv(csv_rows, config["csv"])

    failed = [r for r in all_reports if r.verdict != "pass"]
    if failed:
        worst = failed[0]
        print(f"FAILED: {len(failed)} checks; first: {worst.scenario}:{worst.identity}"
              f" ({worst.note})", file=sys.stderr)
        return 1
    print(f"all {len(all_reports)} checks passed")
    return 0


def cmd_catalog(_args):
    for name, builder in sorted(full_catalog().items()):
        scn = builder()
        d = scn.describe()
        closed = "closed" if d["closed"] else "open"
        print(f"{name:24s} kind={d['kind']:14s} k={d['k']} dims={d['dims']}"
              f" dim={d['dim']} {closed}")
    return 0


def cmd_report(args):
    if not args.diff or len(args.diff) != 2:
        raise ConfigError("report needs --diff A.json B.json")

    def load(path):
        with open(path) as fh:
            return json.load(fh)

    a, b = load(args.diff[0]), load(args.diff[1])
    if a == b:
        print("reports identical")
        return 0
    keys_a = {(r["scenario"], r["identity"]): r for r in a}
    keys_b = {(r["scenario"], r["identity"]): r for r in b}
    for key in sorted(set(keys_a) | set(keys_b)):
        if key not in keys_a:
            print(f"only in {args.diff[1]}: {key[0]}:{key[1]}")
        elif key not in keys_b:
            print(f"only in {args.diff[0]}: {key[0]}:{key[1]}")
        elif keys_a[key] != keys_b[key]:
            fields = [f for f in keys_a[key]
                      if keys_a[key][f] != keys_b[key].get(f)]
            print(f"differs: {key[0]}:{key[1]} fields {fields}")
    return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="splitgeom",
        description="verify divergence and integral identities of orthogonal "
                    "splittings on built-in or configured scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run checks and write reports")
    v.add_argument("--scenario", help="catalog name or JSON config path")
    v.add_argument("--all", action="store_true", help="run the whole catalog")
    v.add_argument("--grid", type=int, help="quadrature resolution per axis")
    v.add_argument("--tol", type=float,
                   help="override pointwise and integral tolerances")
    v.add_argument("--seed", type=int, help="sample-point seed")
    v.add_argument("--samples", type=int, help="random sample count")
    v.add_argument("--out", help="report JSON path")
    v.add_argument("--csv", help="per-point residual CSV path")
    v.add_argument("--threads", type=int,
                   help="worker threads (default $SPLITGEOM_THREADS or 1)")
    v.set_defaults(fn=cmd_verify)

    c = sub.add_parser("catalog", help="list built-in scenarios")
    c.set_defaults(fn=cmd_catalog)

    r = sub.add_parser("report", help="compare two report files")
    r.add_argument("--diff", nargs=2, metavar=("A", "B"))
    r.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (GeometryError, GapError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
