"""Command-line driver: convergence tables, identity checks and mesh dumps."""

import argparse
import json
import logging
import sys

from .mesh import UnsupportedMeshError, build_uniform_parallelogram_mesh, build_uniform_square_mesh
from .plate import ConformityError
from .sparse import DEFAULT_TOL, SolverError
from .study import (DEFAULT_LEVELS, SUITE_LEVELS, TABLE_ERROR_DEGREE, emit_table,
                    run_identity_suite, run_plate_study, run_poisson_study)

QUICK_MAX_N = 32


def parse_levels(text):
    try:
        levels = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}")
    if not levels:
        raise argparse.ArgumentTypeError("at least one level is required")
    return levels


def check_levels(levels, allow_any):
    """Levels must be strictly increasing; by default also 4 * 2^k."""
    if any(n < 1 for n in levels):
        return "levels must be positive"
    if any(b <= a for a, b in zip(levels, levels[1:])):
        return "levels must be strictly increasing"
    if not allow_any:
        bad = [n for n in levels if n < 4 or n % 4 or (n // 4) & (n // 4 - 1)]
        if bad:
            return f"levels {bad} are not 4 * 2^k (pass --allow-any-n to override)"
    return None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--levels", type=parse_levels, default=None,
                        help="comma-separated subdivision counts n (mesh has 2n^2 triangles)")
    common.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="relative residual tolerance of the linear solves")
    common.add_argument("--quick", action="store_true", help=f"drop levels above n={QUICK_MAX_N}")
    common.add_argument("--allow-any-n", action="store_true",
                        help="accept levels that are not 4 * 2^k")
    common.add_argument("--seed", type=int, default=42, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="ncfem",
        description="Nonconforming and mixed finite elements with K_h post-processing.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    for name, helptext in (("poisson", "Crouzeix-Raviart convergence table (square, sine solution)"),
                           ("plate", "Morley convergence table (parallelogram plate)")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--error-degree", type=int, choices=(3, 6), default=TABLE_ERROR_DEGREE,
                       help="quadrature degree of the error norms")
        p.add_argument("--method", choices=("direct", "cg"), default="direct")
        p.add_argument("--record", default=None, help="also write a JSON run record here")

    sub.add_parser("verify", parents=[common],
                   help="run the equivalence, bound and recovery identity checks")

    p = sub.add_parser("mesh-dump", parents=[common], help="print a mesh as 'v x y' / 't i j k' lines")
    p.add_argument("--domain", choices=("square", "parallelogram"), default="square")
    return parser


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    default = {"verify": SUITE_LEVELS, "mesh-dump": (4,)}.get(args.command, DEFAULT_LEVELS)
    levels = list(args.levels or default)
    allow_any = args.allow_any_n or args.command in ("verify", "mesh-dump")
    problem = check_levels(levels, allow_any)
    if problem:
        parser.error(problem)
    if args.quick:
        levels = [n for n in levels if n <= QUICK_MAX_N] or levels[:1]

    try:
        if args.command in ("poisson", "plate"):
            study = run_poisson_study if args.command == "poisson" else run_plate_study
            table = study(levels, tol=args.tol, error_degree=args.error_degree,
                          method=args.method)
            _write(emit_table(table, args.format), args.out)
            if args.record:
                with open(args.record, "w", encoding="utf-8") as fh:
                    json.dump(table.to_record(), fh, indent=2)
            return 0
        if args.command == "verify":
            report = run_identity_suite(levels, seed=args.seed, tol=args.tol)
            text = report.summary() + "\n"
            text += "all identities passed\n" if report.passed else (
                f"{len(report.failures())} identities FAILED\n")
            _write(text, args.out)
            return 0 if report.passed else 1
        builder = (build_uniform_square_mesh if args.domain == "square"
                   else build_uniform_parallelogram_mesh)
        _write(builder(levels[0]).to_text(), args.out)
        return 0
    except (SolverError, ConformityError, UnsupportedMeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
