"""Command-line entry point: ``verify`` a program or a revision ``sequence``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cfa import build_cfa
from .engine import (
    DEFAULT_MAX_NODES,
    DEFAULT_TIME_LIMIT,
    RESOURCE_OUT,
    SAFE,
    UNSAFE,
    VerifyOptions,
    dump_final_precision,
    verify,
)
from .minimp import ParseError, SourceProgram, parse_program
from .precision import DEFAULT_SCOPE, KINDS, PREDICATE, SCOPES, PrecisionFormatError, ProgramPrecision, read_precision_file, rescope
from .predicate import DEFAULT_MODE, MODES
from .regression import emit_report, load_sequence, run_sequence
from .solver import DEFAULT_NODE_BUDGET

EXIT = {SAFE: 0, UNSAFE: 1, RESOURCE_OUT: 2}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", choices=KINDS, default=PREDICATE)
    p.add_argument("--abstraction", choices=MODES, default=DEFAULT_MODE)
    p.add_argument("--reuse-scope", choices=SCOPES, default=DEFAULT_SCOPE)
    p.add_argument("--budget-nodes", type=int, default=DEFAULT_MAX_NODES, help="maximum ARG nodes")
    p.add_argument("--budget-time", type=float, default=DEFAULT_TIME_LIMIT, help="CPU seconds per task")
    p.add_argument("--budget-solver", type=int, default=DEFAULT_NODE_BUDGET, help="search nodes per solver query")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="precision-reuse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify one program")
    v.add_argument("file", type=Path)
    _common(v)
    v.add_argument("--precision-in", type=Path)
    v.add_argument("--precision-out", type=Path)

    s = sub.add_parser("sequence", help="verify a sequence of revisions")
    s.add_argument("source", type=Path, help="directory of revisions or a manifest file")
    _common(s)
    s.add_argument("--report", choices=("table", "csv", "json"), default="table")
    s.add_argument("--compare", action="store_true", help="run with and without reuse")
    s.add_argument("--no-reuse", action="store_true", help="start every revision from the empty precision")
    return parser


def _options(args) -> VerifyOptions:
    return VerifyOptions(args.domain, args.abstraction, args.budget_nodes, args.budget_time, args.budget_solver)


def cmd_verify(args) -> int:
    try:
        text = args.file.read_text()
        cfa = build_cfa(parse_program(SourceProgram(text, args.file.name)))
        initial = ProgramPrecision(args.domain)
        if args.precision_in is not None:
            stored = read_precision_file(args.precision_in.read_bytes(), args.domain, set(cfa.locations.values()))
            initial = rescope(stored, args.reuse_scope, cfa)
    except (OSError, ParseError, PrecisionFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = verify(cfa, args.domain, initial, _options(args))
    data = dump_final_precision(run)
    if args.precision_out is not None:
        args.precision_out.write_bytes(data)
    print(f"verdict: {run.verdict}")
    s = run.stats
    print(
        f"refinements: {s.refinements}  abstractions: {s.abstraction_computations}  "
        f"solver calls: {s.solver_calls}  arg nodes: {s.arg_nodes}  cpu: {s.cpu_time:.3f}s  "
        f"precision bytes: {s.precision_bytes_out}"
    )
    if run.verdict.counterexample is not None:
        print("counterexample:")
        for line in str(run.verdict.counterexample).splitlines():
            print(f"  {line}")
    return EXIT[run.verdict.kind]


def cmd_sequence(args) -> int:
    try:
        seq = load_sequence(
            args.source,
            domain=args.domain,
            reuse=not args.no_reuse,
            scope=args.reuse_scope,
            abstraction=args.abstraction,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_sequence(seq, _options(args), compare=args.compare)
    sys.stdout.write(emit_report(report, args.report).decode())
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_sequence(args)


if __name__ == "__main__":
    sys.exit(main())
