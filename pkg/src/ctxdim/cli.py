"""Command-line entry point: ``ctxdim <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import formats as fm
from .inequalities import (
    BOUNDS,
    FUNCTIONALS,
    NONCONTEXTUAL,
    BehaviorError,
    behavior_from,
    canonical_chsh_setup,
    canonical_cglmp4_optimal_setup,
    canonical_cglmp4_separable_setup,
    certify,
)

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_NUMERICAL = 3
EXIT_NONCONTEXTUAL = 10
EXIT_CONTEXTUAL = 11
EXIT_DIM3 = 12
EXIT_DIM4 = 13


class NumericalFailure(RuntimeError):
    pass


def verdict_exit_code(certified_min_dimension) -> int:
    if certified_min_dimension == NONCONTEXTUAL:
        return EXIT_NONCONTEXTUAL
    d = int(certified_min_dimension)
    if d >= 4:
        return EXIT_DIM4
    return EXIT_DIM3 if d == 3 else EXIT_CONTEXTUAL


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise fm.FormatError(None, exc.strerror or str(exc), path) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        fm.atomic_write(out, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_bounds(args) -> int:
    names = [args.functional] if args.functional else sorted(BOUNDS)
    for name in names:
        if name not in BOUNDS:
            raise fm.FormatError(None, f"unknown functional {name!r}; known: {sorted(BOUNDS)}", "bounds")
        reg = BOUNDS[name]
        print(f"{name}")
        print(f"  noncontextual  {reg.noncontextual.value:.10g}  [{reg.noncontextual.provenance}]")
        for d, b in sorted(reg.dimension.items()):
            print(f"  dimension {d:<4} {b.value:.10g}  [{b.provenance}]")
        if reg.quantum_max is not None:
            print(f"  quantum max    {reg.quantum_max.value:.10g}  [{reg.quantum_max.provenance}]")
    return EXIT_OK


def cmd_certify(args) -> int:
    text = _read(args.behavior)
    behavior = fm.load_behavior(text, args.behavior, functional=args.functional,
                                joint=True if args.joint else None, tolerance=args.tol)
    value = float(FUNCTIONALS[args.functional](behavior))
    if args.functional == "chsh":
        value = abs(value)
    verdict = certify(value, args.stderr, args.functional, args.k)
    report = fm.CertificationReport.from_verdict(verdict, fm.digest(text), timestamp=args.timestamp)
    out = args.report or args.behavior + ".report"
    fm.atomic_write(out, fm.dump_report(report))
    crossed = ", ".join(verdict.thresholds_crossed) or "none"
    dim = verdict.certified_min_dimension
    print(f"{args.functional} = {value:.6f} +/- {args.stderr:g} (k = {args.k:g})")
    print(f"thresholds crossed: {crossed}")
    print(f"verdict: {dim if dim == NONCONTEXTUAL else f'dimension >= {dim}'}")
    print(f"report: {out}")
    return verdict_exit_code(dim)


def cmd_canonical(args) -> int:
    builders = {
        "optimal": (canonical_cglmp4_optimal_setup, "cglmp4"),
        "separable": (canonical_cglmp4_separable_setup, "cglmp4"),
        "chsh": (canonical_chsh_setup, "chsh"),
    }
    build, fname = builders[args.setup]
    asm, povms = build()
    value = float(FUNCTIONALS[fname](behavior_from(asm, povms)))
    if fname == "chsh":
        value = abs(value)
    if args.emit:
        fm.atomic_write(args.emit, fm.dump_assemblage(asm, povms, {fname: value}))
    print(f"{args.setup}: {fname} = {value:.8f}")
    return EXIT_OK


def cmd_seesaw(args) -> int:
    from .seesaw import SeesawConfig, SeesawError, run, save_records

    cfg = SeesawConfig(restarts=args.restarts, master_seed=args.seed,
                       convergence_window=args.window, value_tol=args.value_tol,
                       max_alternations=args.max_alternations)
    try:
        best, records = run(cfg, args.ppt)
    except SeesawError as exc:
        raise NumericalFailure(str(exc)) from None
    if args.out:
        save_records(records, args.out)
        summary = {"ppt": args.ppt, "restarts": args.restarts, "master_seed": args.seed,
                   "best_restart": best.restart, "best_value": best.final_value,
                   "failed": [r.restart for r in records if r.assemblage is None]}
        fm.atomic_write(Path(args.out) / "summary.json", json.dumps(summary, indent=1) + "\n")
    print(f"best value {best.final_value:.10f} (restart {best.restart}, ppt={args.ppt})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    setup, _ = fm.load_setup(_read(args.setup), args.setup)
    behavior = setup.behavior()
    _emit(fm.dump_behavior(behavior, tolerance=1e-9, meta={"source": "simulate"}), args.out)
    if args.out:
        value = float(setup.functional(behavior))
        print(f"{setup.functional.name} = {abs(value) if setup.functional.name == 'chsh' else value:.8f}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    from .photonics import monte_carlo

    setup, noise = fm.load_setup(_read(args.setup), args.setup)
    res = monte_carlo(setup, noise, args.samples, args.seed)
    if not np.isfinite(res.std):
        raise NumericalFailure("Monte-Carlo statistics are not finite")
    _emit(fm.dump_montecarlo(res, setup.functional.name), args.out)
    return EXIT_OK


def cmd_table(args) -> int:
    from .tables import recorded_table

    _emit(fm.dump_table(recorded_table(args.name, args.column)), args.out)
    return EXIT_OK


def cmd_chsh_terms(args) -> int:
    vals = []
    for lineno, line in enumerate(_read(args.file).splitlines(), start=1):
        s = line.split("#")[0].strip()
        if s:
            try:
                vals.append(float(s))
            except ValueError:
                raise fm.FormatError(lineno, f"not a number: {s!r}", args.file) from None
    try:
        s_value = fm.ingest_chsh_terms(vals)
    except ValueError as exc:
        raise fm.FormatError(None, str(exc), args.file) from None
    print(f"S = {s_value:.6f}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxdim", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("bounds", help="print the bound registry")
    s.add_argument("functional", nargs="?", choices=sorted(BOUNDS))
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("certify", help="certify a dimension from a behavior file")
    s.add_argument("behavior")
    s.add_argument("--functional", choices=sorted(FUNCTIONALS), default="cglmp4")
    s.add_argument("--stderr", type=float, default=0.0)
    s.add_argument("--k", type=float, default=1.0)
    s.add_argument("--joint", action="store_true", help="read entries as joint p(ab|xy)")
    s.add_argument("--tol", type=float, default=None, help="override the file's tolerance")
    s.add_argument("--report", help="structured report path (default <behavior>.report)")
    s.add_argument("--timestamp", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("canonical", help="write a canonical setup and its value")
    s.add_argument("--setup", choices=("optimal", "separable", "chsh"), required=True)
    s.add_argument("--emit")
    s.set_defaults(func=cmd_canonical)

    s = sub.add_parser("seesaw", help="run the alternating SDP optimization")
    s.add_argument("--ppt", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--restarts", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--window", type=int, default=10)
    s.add_argument("--value-tol", type=float, default=1e-7)
    s.add_argument("--max-alternations", type=int, default=500)
    s.add_argument("--out")
    s.set_defaults(func=cmd_seesaw)

    s = sub.add_parser("simulate", help="predict the behavior of a photonic setup")
    s.add_argument("--setup", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("montecarlo", help="Monte-Carlo error budget of a photonic setup")
    s.add_argument("--setup", required=True)
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("table", help="export a recorded probability table as a behavior file")
    s.add_argument("name", choices=("separable", "optimal"))
    s.add_argument("column", choices=("expected", "measured"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_table)

    s = sub.add_parser("chsh-terms", help="sum eight signed CHSH terms (one per line)")
    s.add_argument("file")
    s.set_defaults(func=cmd_chsh_terms)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (fm.FormatError, BehaviorError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
