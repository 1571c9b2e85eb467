"""Command-line front end: ``vortexspec <subcommand> [options]``.

Exit status is 0 on success, 1 when ``verify`` finds a failed check,
2 for usage errors and 3 when a solver raises.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import VortexSpecError

EXIT_OK, EXIT_CHECKS, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, multi_m: bool = False, m_default=1):
    if multi_m:
        p.add_argument("--m", type=int, nargs="*", default=[m_default] if m_default is not None else [],
                       help="winding numbers")
    else:
        p.add_argument("--m", type=int, default=m_default, help="winding number")
    p.add_argument("--rmax", type=float, default=50.0, help="right end of the domain")
    p.add_argument("--tol", type=float, default=1e-10, help="collocation residual tolerance")
    p.add_argument("--out", type=Path, default=Path("vortexspec_out"), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortexspec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vortex", help="vortex profile")
    _common(p)

    p = sub.add_parser("index", help="index function and zero count")
    _common(p)
    p.add_argument("--op", choices=("L1", "L2"), default="L1")
    p.add_argument("--delta", type=float, default=0.0)

    p = sub.add_parser("innerprods", help="inner-product table")
    _common(p)
    p.add_argument("--family", choices=("K", "J"), default="K")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--angular", action="store_true", help="include the 2 pi angular factor")

    p = sub.add_parser("selfsim", help="truncated self-similar profile")
    _common(p)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.1)

    p = sub.add_parser("verify", help="full pipeline with a-posteriori checks")
    _common(p, multi_m=True)
    p.add_argument("--delta", type=float, nargs="*", default=[])
    p.add_argument("--b", type=float, nargs="*", default=[])
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--plot", action="store_true", help="also write SVG plots")

    p = sub.add_parser("plot", help="SVG figures")
    _common(p, multi_m=True)
    p.add_argument("--what", choices=("vortex", "index", "constants", "kfuncs", "jfuncs"),
                   default="vortex")
    return ap


def _emit(obj_json, csv_writer, args, stem: str) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        return csv_writer(args.out / f"{stem}.csv")
    return obj_json(args.out / f"{stem}.json")


def _write_json(data: dict):
    def w(path):
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path
    return w


def cmd_vortex(args) -> int:
    from .vortex import solve_vortex
    prof = solve_vortex(args.m, args.rmax, args.tol)
    print(_emit(prof.to_json, prof.to_csv, args, f"vortex_m{args.m}"))
    return EXIT_OK


def cmd_index(args) -> int:
    from .index import OperatorSpec, analyze, compute_index_function
    from .vortex import solve_vortex
    prof = solve_vortex(args.m, args.rmax, args.tol)
    fn = compute_index_function(OperatorSpec(args.op, args.m, prof, args.delta), args.rmax, args.tol)
    rep = analyze(fn)
    print(_emit(rep.to_json, fn.to_csv, args, f"index_{args.op}_m{args.m}"))
    print(f"zero_count={rep.zero_count} c0={rep.c0!r} certified={rep.tail_sign_certified}")
    return EXIT_OK


def cmd_innerprods(args) -> int:
    from .innerprod import compute_table
    from .report import export_csv
    t = compute_table(args.m, args.family, args.delta, r_max=args.rmax, tol=args.tol, angular=args.angular)
    print(_emit(t.to_json, lambda p: export_csv(t, p), args, f"{args.family}_m{args.m}"))
    print(f"v1={t.v1!r} v2={t.v2!r} v3={t.v3!r} det={t.det!r}")
    return EXIT_OK


def cmd_selfsim(args) -> int:
    from .selfsim import SelfSimilarParams, solve_selfsim
    prof = solve_selfsim(SelfSimilarParams(args.m, args.b, args.eta), args.tol)
    print(_emit(prof.to_json, prof.to_csv, args, f"selfsim_m{args.m}_b{args.b:g}"))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .report import RunConfig, run_verify
    cfg = RunConfig(ms=list(args.m), r_max=args.rmax, tol=args.tol, deltas=list(args.delta),
                    bs=list(args.b), eta=args.eta, out=str(args.out), plot=args.plot)
    report = run_verify(cfg)
    for m, c in report.checks:
        tag = "INFO" if c.informational else ("PASS" if c.passed else "FAIL")
        val = "n/a" if c.value is None else f"{c.value:.6g}"
        print(f"m={m} {tag:4s} {c.name:32s} {val:>14s} {c.note}".rstrip())
    if args.format == "csv":
        _write_checks_csv(report, args.out / "report.csv")
    print(args.out / "report.json")
    return EXIT_OK if report.passed else EXIT_CHECKS


def _write_checks_csv(report, path: Path):
    import csv
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "name", "value", "threshold", "passed", "informational", "note"])
        for m, c in report.checks:
            w.writerow([m, c.name, "" if c.value is None else repr(c.value),
                        "" if c.threshold is None else repr(float(c.threshold)),
                        int(c.passed), int(c.informational), c.note])


def cmd_plot(args) -> int:
    from .index import OperatorSpec, asymptotic_constants, compute_index_function
    from .innerprod import compute_table
    from .plots import PlotStyle, Series, export_plot
    from .vortex import solve_vortex
    args.out.mkdir(parents=True, exist_ok=True)
    ms = list(args.m)
    if args.what == "vortex":
        series = [Series(f"m={m}", p.r, p.R()) for m in ms for p in [solve_vortex(m, args.rmax, args.tol)]]
        print(export_plot(series, args.out / "vortex_profiles.svg", PlotStyle(ylabel="R")))
        return EXIT_OK
    for m in ms:
        if m < 1:
            raise ValueError("index and inner-product plots need m >= 1")
        prof = solve_vortex(m, args.rmax, args.tol)
        if args.what in ("index", "constants"):
            series = []
            for kind in ("L1", "L2"):
                fn = compute_index_function(OperatorSpec(kind, m, prof), args.rmax, args.tol)
                if args.what == "index":
                    series.append(Series(kind, fn.r, fn.solution.values[0]))
                else:
                    r = fn.r[1:]
                    U, p = fn.solution.values[0][1:], fn.flux[1:]
                    series.append(Series(f"{kind} c0", r, U + p / (2 * m * r ** (2 * m))))
                    asymptotic_constants(fn)
            path = args.out / f"{args.what}_m{m}.svg"
            print(export_plot(series, path, PlotStyle(hline=0.0)))
        else:
            from .report import _table_curve_series
            fam = "K" if args.what == "kfuncs" else "J"
            t = compute_table(m, fam, profile=prof, r_max=args.rmax, tol=args.tol)
            print(export_plot(_table_curve_series(t), args.out / f"{args.what}_m{m}.svg",
                              PlotStyle(ylabel="running integral")))
    return EXIT_OK


COMMANDS = {"vortex": cmd_vortex, "index": cmd_index, "innerprods": cmd_innerprods,
            "selfsim": cmd_selfsim, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    try:
        return COMMANDS[args.command](args)
    except VortexSpecError as exc:
        print(f"vortexspec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"vortexspec: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
