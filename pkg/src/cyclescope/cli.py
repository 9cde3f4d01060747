"""Command-line front end: model building, analysis, and sweeps.

Exit codes: 0 success, 2 validation/input error, 3 internal-consistency
alarm (a proved bound was exceeded, i.e. a bug), 4 inconclusive result.
Set CYCLESCOPE_SEED to fix all randomized sampling.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .continuation import (BadBracketError, RotatedFamily, certify,
                           continue_cycle, saddle_node_threshold)
from .cycles import (AnnulusError, InternalConsistencyError, abel_diagnostics,
                     annulus_integral, constant_cycles, find_cycles, partition)
from .equation import PiecewiseEquation, ValidationError, normalize, validate
from .field import polynomial_field
from .models import (AbelSpec, HarvestSpec, MosquitoSpec, SpecError, abel_model,
                     cherkas_transform, classify_regime, harvesting_model,
                     mosquito_long_wait, mosquito_short_wait)
from .poincare import (NotInDomain, derivative_discrete, derivative_integral,
                       displacement_many, knots)
from .flow import StepStatus, flow_map

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INTERNAL = 3
EXIT_INCONCLUSIVE = 4


def _seed() -> int:
    return int(os.environ.get("CYCLESCOPE_SEED", "0"))


def _dump(obj, args) -> None:
    if getattr(args, "format", "json") == "json":
        text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    else:
        text = _to_csv(obj)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(obj) -> str:
    rows = obj if isinstance(obj, list) else obj.get("rows", [obj])
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def _load_model(path: str) -> tuple[PiecewiseEquation, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError("cannot read model file %s: %s" % (path, exc))
    eq_doc = doc.get("equation", doc)
    try:
        eq = PiecewiseEquation.from_dict(eq_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("malformed model file %s: %s" % (path, exc))
    return eq, doc


# ---------------------------------------------------------------------------
# preset builders
# ---------------------------------------------------------------------------

def _preset_equation(preset: str, params: dict):
    if preset == "harvesting":
        g = polynomial_field(params.get("g_coeffs", [0.0, 1.0, -1.0]),
                             domain=(0.0, np.inf))
        spec = HarvestSpec(g=g, h=params.get("h", 0.1),
                           T=params.get("T", 2.0), T1=params.get("T1", 1.0))
        return harvesting_model(spec)
    if preset == "abel":
        spec = AbelSpec(a1=params.get("a1", 0.0), b1=params.get("b1", 0.0),
                        c1=params.get("c1", 0.0), a2=params.get("a2", 0.0),
                        b2=params.get("b2", 0.0), c2=params.get("c2", 0.0),
                        T=params.get("T", 1.0), T1=params.get("T1", 0.5))
        eq, dets = abel_model(spec)
        return eq, dets
    if preset in ("mosquito-long", "mosquito-short"):
        spec = MosquitoSpec(a=params.get("a", 2.0), mu=params.get("mu", 1.0),
                            xi=params.get("xi", 1.0), c=params.get("c", 0.1),
                            T=params.get("T", 1.5), Tbar=params.get("Tbar", 1.0))
        if preset == "mosquito-long":
            return mosquito_long_wait(spec)
        return mosquito_short_wait(spec)
    raise ValidationError("unknown preset %r" % preset)


def _parse_params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ValidationError("parameter %r is not name=value" % item)
        k, v = item.split("=", 1)
        if k == "g_coeffs":
            out[k] = [float(t) for t in v.split(",")]
        else:
            out[k] = float(v)
    return out


def _preset_family(preset: str, varying: str, fixed: dict) -> RotatedFamily:
    lo, hi = fixed.pop("_range", (0.0, 1.0))

    def build(alpha: float) -> PiecewiseEquation:
        params = dict(fixed)
        params[varying] = alpha
        eq, _ = _preset_equation(preset, params)
        return eq

    return RotatedFamily(builder=build, alpha_range=(lo, hi))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_model(args) -> int:
    params = _parse_params(args.param)
    eq, thresholds = _preset_equation(args.preset, params)
    _dump({"preset": args.preset, "params": params,
           "equation": eq.to_dict(),
           "thresholds": {k: v for k, v in thresholds.items()}}, args)
    return EXIT_OK


def _cycle_rows(cycles):
    return [c.to_dict() for c in cycles]


def cmd_analyze(args) -> int:
    eq, doc = _load_model(args.model)
    report = validate(eq)
    out = {"equation": eq.to_dict(), "validation": report.to_dict()}
    if not report.ok:
        _dump(out, args)
        return EXIT_VALIDATION
    ne = normalize(eq)
    if report.annulus:
        out["partition"] = None
        out["cycles"] = []
        out["note"] = "periodic annulus"
        _dump(out, args)
        return EXIT_OK
    try:
        if ne.n == 2:
            out["partition"] = partition(ne).to_dict()
        cycles = find_cycles(ne, grid=args.grid)
    except InternalConsistencyError as exc:
        out["error"] = str(exc)
        _dump(out, args)
        return EXIT_INTERNAL
    out["cycles"] = _cycle_rows(cycles)
    if "thresholds" in doc:
        out["thresholds"] = doc["thresholds"]
    _dump(out, args)
    return EXIT_OK


def cmd_cycles(args) -> int:
    eq, _ = _load_model(args.model)
    ne = normalize(eq)
    out = {}
    try:
        if ne.n == 2:
            out["partition"] = partition(ne).to_dict()
        cycles = find_cycles(ne, grid=args.grid,
                             tol_hyperbolic=args.tol_hyperbolic)
    except AnnulusError as exc:
        out["note"] = str(exc)
        out["cycles"] = []
        _dump(out, args)
        return EXIT_OK
    except InternalConsistencyError as exc:
        out["error"] = str(exc)
        _dump(out, args)
        return EXIT_INTERNAL
    out["cycles"] = _cycle_rows(cycles)
    _dump(out, args)
    return EXIT_OK


def cmd_poincare(args) -> int:
    eq, _ = _load_model(args.model)
    ne = normalize(eq)
    try:
        kn = knots(ne, args.x0)
    except NotInDomain as exc:
        _dump({"x0": args.x0, "error": str(exc)}, args)
        return EXIT_VALIDATION
    out = {"x0": args.x0, "knots": list(kn.values), "in_V": kn.in_V}
    if kn.in_V:
        jd = derivative_discrete(ne, args.x0, kn)
        out["discrete"] = {"P": jd.value, "P1": jd.d1, "P2": jd.d2, "P3": jd.d3}
    ji = derivative_integral(ne, args.x0, kn)
    out["integral"] = {"P": ji.value, "P1": ji.d1, "P2": ji.d2, "P3": ji.d3}
    _dump(out, args)
    return EXIT_OK


def cmd_threshold(args) -> int:
    fixed = _parse_params(args.param)
    fixed["_range"] = (args.bracket[0], args.bracket[1])
    family = _preset_family(args.preset, args.varying, fixed)
    cert = certify(family)
    try:
        alpha_star, merged = saddle_node_threshold(
            family, (args.bracket[0], args.bracket[1]),
            window=tuple(args.window) if args.window else None,
            grid=args.grid)
    except BadBracketError as exc:
        _dump({"error": str(exc)}, args)
        return EXIT_INCONCLUSIVE
    _dump({"parameter": args.varying, "alpha_star": alpha_star,
           "certificate_sign": cert.sign,
           "merged_cycle": merged.to_dict()}, args)
    return EXIT_OK


def cmd_branch(args) -> int:
    fixed = _parse_params(args.param)
    fixed["_range"] = (min(args.start, args.stop), max(args.start, args.stop))
    family = _preset_family(args.preset, args.varying, fixed)
    eq0 = family.equation(args.start)
    cycles = [c for c in find_cycles(normalize(eq0), grid=args.grid)
              if c.kind == "non-constant"]
    if not cycles:
        _dump({"error": "no non-constant cycle at the starting parameter"}, args)
        return EXIT_INCONCLUSIVE
    seed = min(cycles, key=lambda c: abs(c.x0 - args.x0)) if args.x0 is not None \
        else cycles[0]
    path = np.linspace(args.start, args.stop, args.steps + 1)[1:]
    branch = continue_cycle(family, seed, args.start, path)
    rows = [{"alpha": a, "x0": c.x0, "P1": c.jet.d1, "stability": c.stability}
            for a, c in branch.points]
    _dump({"rows": rows, "termination": branch.termination,
           "last_alpha": branch.last_alpha}, args)
    return EXIT_OK


def _sweep_row(task):
    preset, varying, fixed, alpha, grid = task
    params = dict(fixed)
    params[varying] = alpha
    try:
        eq, _ = _preset_equation(preset, params)
        cycles = [c for c in find_cycles(normalize(eq), grid=grid)
                  if c.kind == "non-constant"]
        return {"alpha": alpha, "count": len(cycles),
                "x0": ";".join("%.12g" % c.x0 for c in cycles),
                "status": "ok"}
    except (SpecError, ValidationError, AnnulusError, NotInDomain) as exc:
        return {"alpha": alpha, "count": -1, "x0": "", "status": "failed: %s" % exc}


def cmd_sweep(args) -> int:
    fixed = _parse_params(args.param)
    steps = max(args.steps, 1) if args.start != args.stop else 1
    alphas = np.linspace(args.start, args.stop, steps)
    tasks = [(args.preset, args.varying, fixed, float(a), args.grid)
             for a in alphas]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    _dump({"rows": rows}, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    eq, _ = _load_model(args.model)
    ne = normalize(eq)
    rng = np.random.default_rng(_seed())
    lo, hi = ne.scan_interval()
    xs = rng.uniform(lo, hi, args.samples)
    worst = 0.0
    tested = 0
    escaped = 0
    for x0 in xs:
        try:
            kn = knots(ne, x0)
        except NotInDomain:
            escaped += 1
            continue
        if not kn.in_V:
            continue
        jd = derivative_discrete(ne, x0, kn)
        ji = derivative_integral(ne, x0, kn)
        for a, b in ((jd.d1, ji.d1), (jd.d2, ji.d2), (jd.d3, ji.d3)):
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
        tested += 1
    out = {"samples": args.samples, "tested": tested, "escaped": escaped,
           "max_disagreement": worst}
    _dump(out, args)
    if tested == 0:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if worst <= args.tol else EXIT_INTERNAL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_shared(p):
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cyclescope",
        description="Limit cycles of piecewise-autonomous periodic equations")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="emit a preset model file")
    p.add_argument("--preset", required=True,
                   choices=("harvesting", "abel", "mosquito-long", "mosquito-short"))
    p.add_argument("--param", action="append", metavar="name=value")
    _add_shared(p)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("analyze", help="full pipeline on a model file")
    p.add_argument("model")
    _add_shared(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("cycles", help="partition report and cycle table")
    p.add_argument("model")
    p.add_argument("--tol-hyperbolic", type=float, default=1e-7)
    _add_shared(p)
    p.set_defaults(func=cmd_cycles)

    p = sub.add_parser("poincare", help="return-map jet at a point")
    p.add_argument("model")
    p.add_argument("--x0", type=float, required=True)
    _add_shared(p)
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("threshold", help="saddle-node parameter by bisection")
    p.add_argument("--preset", required=True)
    p.add_argument("--varying", required=True)
    p.add_argument("--bracket", type=float, nargs=2, required=True)
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.add_argument("--param", action="append", metavar="name=value")
    _add_shared(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("branch", help="continue a cycle along a parameter")
    p.add_argument("--preset", required=True)
    p.add_argument("--varying", required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--param", action="append", metavar="name=value")
    _add_shared(p)
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("sweep", help="cycle counts along a parameter range")
    p.add_argument("--preset", required=True)
    p.add_argument("--varying", required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--param", action="append", metavar="name=value")
    _add_shared(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="cross-route derivative check")
    p.add_argument("model")
    p.add_argument("--samples", type=int, default=100)
    _add_shared(p)
    p.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_VALIDATION
    except SpecError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_VALIDATION
    except InternalConsistencyError as exc:
        sys.stderr.write("internal consistency alarm: %s\n" % exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
