"""Command-line front end: ``hypaf {symcheck,sphere,flow,afcheck,sobolev}``.

Every command prints a JSON document.  ``--out`` writes it atomically together
with a run manifest.  Exit codes: 0 all checks pass, 1 a monitored check
failed, 2 invalid input or precondition, 3 flow breakdown.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, grid
from ._io import atomic_write_text, dumps, sha256_file
from .conformal import asymptotic_compare, gamma1_identity, ConformalFactor, sobolev_battery
from .flow import (
    FlowBreakdown,
    area_derivative_gap,
    config_from_json,
    decay_fit,
    gauss_bonnet_drift,
    lemma_residual,
    limit_bound_check,
    q_monotonicity,
    run,
    variational_residual,
)
from .hypersurface import (
    CurvatureError,
    SurfaceFormatError,
    all_reports,
    geodesic_sphere,
    horoconvexity_margin,
    read_surface,
    write_surface,
)
from .symfunc import ConeKind, ConeSpec, DomainError, PreconditionError, identity_battery, scan_cone

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BREAKDOWN = 0, 1, 2, 3
SOBOLEV_TOL = 1e-8
RATIO_TOL = 0.02
RATIO_NOISE = 1e-3


class InputError(Exception):
    pass


def _manifest(command, config, seed, inputs, outputs, started):
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_time": time.time() - started,
    }


def _emit(doc, args, command, config, seed=None, inputs=(), started=0.0):
    text = dumps(doc)
    sys.stdout.write(text)
    if getattr(args, "out", None):
        out = Path(args.out)
        atomic_write_text(out, text)
        man = _manifest(command, config, seed, inputs, [out], started)
        atomic_write_text(out.with_name(out.name + ".manifest.json"), dumps(man))


# -- symcheck ---------------------------------------------------------------

def cmd_symcheck(args) -> int:
    started = time.time()
    if args.m < 5:
        raise InputError(f"refined gap needs m >= 5, got {args.m}")
    if args.count < 1:
        raise InputError("count must be >= 1")
    cones = ["horoconvex", "pairwise", "unitbox"] if args.cone == "all" else [args.cone]
    doc = {"m": args.m, "count": args.count, "seed": args.seed, "scans": {}}
    ok = True
    for name in cones:
        s = scan_cone(ConeSpec(ConeKind(name)), args.m, args.count, args.seed, tol=args.tol)
        doc["scans"][name] = s.to_dict()
        if name != "unitbox":
            ok &= s.violations == 0 and s.planted_flagged == s.planted
    if "unitbox" in cones:
        u = doc["scans"]["unitbox"]
        sign = {
            "positive_witness": u["argmax_witness"] if u["positive_count"] else None,
            "positive_gap": u["max_gap"] if u["positive_count"] else None,
            "negative_witness": u["argmin_witness"] if u["negative_count"] else None,
            "negative_gap": u["min_gap"] if u["negative_count"] else None,
        }
        # the refined gap is <= 0 on the horoconvex cone, so a positive unit-box
        # witness is already a change of sign across the two regions
        sign["sign_change"] = sign["positive_witness"] is not None
        doc["unitbox_sign"] = sign
        ok &= sign["sign_change"]
    if args.identities:
        doc["identities"] = identity_battery(args.identities, args.seed)
    doc["pass"] = bool(ok)
    config = {"m": args.m, "count": args.count, "seed": args.seed, "cone": args.cone, "tol": args.tol,
              "identities": args.identities}
    _emit(doc, args, "symcheck", config, args.seed, started=started)
    return EXIT_OK if ok else EXIT_FAIL


# -- sphere -----------------------------------------------------------------

def cmd_sphere(args) -> int:
    started = time.time()
    if args.n < 5:
        raise InputError(f"ambient dimension must be >= 5, got {args.n}")
    if not args.r > 0 or not math.isfinite(args.r):
        raise InputError("radius must be positive")
    rec = geodesic_sphere(args.n, args.r).to_dict()
    _emit(rec, args, "sphere", {"n": args.n, "r": args.r}, started=started)
    return EXIT_OK


# -- afcheck ----------------------------------------------------------------

def cmd_afcheck(args) -> int:
    started = time.time()
    try:
        S = read_surface(args.surface)
    except (OSError, SurfaceFormatError, DomainError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    reports = all_reports(S)
    doc = {
        "n": S.n,
        "N": S.N,
        "quadrature": grid.QUADRATURE,
        "horoconvexity_margin": horoconvexity_margin(S),
        "reports": [r.to_dict() for r in reports],
    }
    _emit(doc, args, "afcheck", {"surface": str(args.surface)}, inputs=[args.surface], started=started)
    return EXIT_OK


# -- sobolev ----------------------------------------------------------------

def cmd_sobolev(args) -> int:
    started = time.time()
    if args.m < 3:
        raise InputError("sphere dimension must be >= 3")
    rows = sobolev_battery(args.count, args.seed, m=args.m, N=args.N)
    gaps = [r.gap for _, _, r in rows]
    doc = {
        "m": args.m,
        "count": args.count,
        "seed": args.seed,
        "min_gap": min(gaps),
        "factors": [{"a": a, "b": b, **r.to_dict()} for a, b, r in rows],
    }
    doc["pass"] = bool(doc["min_gap"] >= -SOBOLEV_TOL)
    _emit(doc, args, "sobolev", {"m": args.m, "count": args.count, "seed": args.seed, "N": args.N},
          args.seed, started=started)
    return EXIT_OK if doc["pass"] else EXIT_FAIL


# -- flow -------------------------------------------------------------------

def ratio_series(trace) -> list:
    return [asymptotic_compare(trace.state_at(i)).to_dict() for i in range(len(trace))]


def _improving(values, noise) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] + noise)) if v.size > 1 else True


def flow_verdicts(trace, ratios) -> dict:
    """Every monitored claim for one completed run, with a pass flag each."""
    n = trace.n
    t = trace.array("t")
    area = trace.array("area")
    verdicts = {}
    verdicts["q_monotone"] = q_monotonicity(trace)
    bound = limit_bound_check(trace)
    verdicts["q_bound"] = {**bound.to_dict(), "pass": bool(bound.lhs >= bound.rhs * (1 - 1e-3))}
    verdicts["horoconvexity"] = {"min_margin": min(trace.horo_margin), "pass": bool(min(trace.horo_margin) > 0)}
    inst = trace.area_growth_gap() / area
    verdicts["area_growth"] = {
        "min_relative_gap": float(inst.min()),
        "pass": bool(inst.min() >= -1e-8),
    }
    if len(trace) >= 5:
        fd = area_derivative_gap(trace) / area
        verdicts["area_growth"]["finite_difference_min_relative_gap"] = float(np.nanmin(fd))
        verdicts["residuals"] = {
            "variational_k2_max": float(np.nanmax(np.abs(variational_residual(trace, 2)))),
            "lemma_l2_max": float(np.nanmax(np.abs(lemma_residual(trace)))),
        }
    fit = decay_fit(trace)
    if fit["points"] >= 2:
        # the claimed bound is decay at least at rate 1/(n-1)
        fit["pass"] = bool(fit["exponent"] <= -0.9 / (n - 1))
    else:
        fit["pass"] = None
    verdicts["umbilicity_decay"] = fit
    if n == 5:
        gb = gauss_bonnet_drift(trace)
        gb["pass"] = bool(gb["relative_spread"] <= 1e-3)
        verdicts["gauss_bonnet"] = gb
    if ratios:
        late = [r for r in ratios if r["t"] >= 2.0]
        rv = {"final": ratios[-1]}
        rv["monotone_after_2"] = bool(
            _improving([abs(r["R1"] - 1) for r in late], RATIO_NOISE)
            and _improving([abs(r["R2"] - 1) for r in late], RATIO_NOISE)
        )
        ok = rv["monotone_after_2"]
        if t[-1] >= 6.0:
            at6 = min(ratios, key=lambda r: abs(r["t"] - 6.0))
            rv["at_t6"] = at6
            ok &= abs(at6["R1"] - 1) <= RATIO_TOL and abs(at6["R2"] - 1) <= RATIO_TOL
        rv["pass"] = bool(ok)
        last = trace.state_at(len(trace) - 1)
        cf = ConformalFactor(n - 1, last.S.theta, np.sinh(last.S.r))
        rv["gamma1_final"] = gamma1_identity(cf, last.t)
        verdicts["conformal_ratios"] = rv
    flags = [v.get("pass") for v in verdicts.values() if isinstance(v, dict)]
    verdicts["pass"] = bool(all(f is not False for f in flags))
    return verdicts


def cmd_flow(args) -> int:
    started = time.time()
    try:
        cfg = config_from_json(Path(args.config).read_text(encoding="utf-8"))
        initial = cfg.initial_surface()
    except (OSError, DomainError, SurfaceFormatError, TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path, side_path = outdir / "trace.csv", outdir / "trace.json"
    verdict_path = outdir / "verdicts.json"
    inputs = [args.config] + ([cfg.surface_file] if cfg.surface_file else [])
    outputs = []
    try:
        trace = run(cfg, initial)
    except PreconditionError as exc:
        raise InputError(str(exc)) from exc
    except (FlowBreakdown, CurvatureError) as exc:
        trace = getattr(exc, "trace", None)
        doc = {"pass": False, "error": str(exc), "t": getattr(exc, "t", None), "node": getattr(exc, "node", None),
               "theta": getattr(exc, "theta", None)}
        last = getattr(exc, "last_state", None)
        if last is not None:
            state_path = outdir / "last_good_state.txt"
            write_surface(state_path, last.S)
            doc["last_good_t"] = last.t
            doc["last_good_state"] = state_path.name
            outputs.append(state_path)
        if trace is not None and len(trace):
            trace.write(csv_path, side_path)
            outputs += [csv_path, side_path]
        atomic_write_text(verdict_path, dumps(doc))
        outputs.append(verdict_path)
        atomic_write_text(outdir / "manifest.json",
                          dumps(_manifest("flow", cfg.to_dict(), None, inputs, outputs, started)))
        sys.stderr.write(f"flow breakdown: {exc}\n")
        sys.stdout.write(dumps(doc))
        return EXIT_BREAKDOWN
    ratios = ratio_series(trace) if cfg.keep_radii else []
    verdicts = flow_verdicts(trace, ratios)
    trace.write(csv_path, side_path)
    atomic_write_text(verdict_path, dumps(verdicts))
    outputs += [csv_path, side_path, verdict_path]
    if ratios:
        ratio_path = outdir / "ratios.json"
        atomic_write_text(ratio_path, dumps(ratios))
        outputs.append(ratio_path)
    if args.figures:
        from .plotting import flow_figures

        outputs += flow_figures(trace, ratios, outdir / "figures")
    atomic_write_text(outdir / "manifest.json",
                      dumps(_manifest("flow", cfg.to_dict(), None, inputs, outputs, started)))
    sys.stdout.write(dumps({"pass": verdicts["pass"], "rows": len(trace), "steps": trace.steps,
                            "outputs": sorted(p.name for p in outputs)}))
    return EXIT_OK if verdicts["pass"] else EXIT_FAIL


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypaf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("symcheck", help="cone scans of the refined Newton-MacLaurin gap")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--count", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cone", choices=["all", "horoconvex", "pairwise", "unitbox"], default="all")
    s.add_argument("--tol", type=float, default=1e-9, help="equality classification tolerance")
    s.add_argument("--identities", type=int, default=0, help="also run the identity battery with this many samples")
    s.add_argument("--out")
    s.set_defaults(func=cmd_symcheck)

    s = sub.add_parser("sphere", help="closed-form geodesic sphere report")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sphere)

    s = sub.add_parser("flow", help="run the inverse curvature flow from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", default="flow_out")
    s.add_argument("--figures", action="store_true", help="also render PNG figures next to the data")
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("afcheck", help="inequality audit of a surface file")
    s.add_argument("surface")
    s.add_argument("--out")
    s.set_defaults(func=cmd_afcheck)

    s = sub.add_parser("sobolev", help="Sobolev-type bound on seeded conformal factors")
    s.add_argument("--m", type=int, default=5)
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--N", type=int, default=400)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sobolev)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, DomainError, PreconditionError) as exc:
        sys.stderr.write(f"hypaf {args.command}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
