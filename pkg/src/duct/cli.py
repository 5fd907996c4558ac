"""Command line client over the same service layer the HTTP API uses.

Exit codes for `query`: 0 definitions found, 1 load/parse error,
2 unresolvable selection, 3 no definitions, 4 traversal budget hit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .model import MilError, ParseError, ResolveError
from .service import (
    QueryRequest,
    Session,
    canonical_json,
    dump_cfg_text,
    run_query,
    stats_dict,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_RESOLVE = 2
EXIT_EMPTY = 3
EXIT_TRUNCATED = 4


def _env_budget() -> int | None:
    raw = os.environ.get("DUCT_BUDGET")
    return int(raw) if raw else None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duct",
        description="Use-define chain queries over MiniIL programs")
    sub = parser.add_subparsers(dest="command", required=True)

    query = sub.add_parser("query", help="resolve a source selection and "
                                         "print its reaching definitions")
    query.add_argument("--program", required=True, help="MiniIL file")
    query.add_argument("--file", help="source file of the selection")
    query.add_argument("--line", type=int, help="1-based source line")
    query.add_argument("--var", help="variable (v, v.field, or v[])")
    query.add_argument("--occurrence", type=int, default=None,
                       help="1-based read index on the line "
                            "(default: last read)")
    query.add_argument("--json", action="store_true",
                       help="print the QueryResponse JSON")
    query.add_argument("--stats", action="store_true",
                       help="dump statistics counters to stderr as JSON")
    query.add_argument("--budget", type=int, default=None,
                       help="traversal budget (or env DUCT_BUDGET)")
    query.add_argument("--dump-cfg", metavar="CLASS::METHOD",
                       help="print the method's block/edge list and exit")

    serve = sub.add_parser("serve", help="run the HTTP query service")
    serve.add_argument("--program", required=True)
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--budget", type=int, default=None)

    oracle = sub.add_parser(
        "oracle-check",
        help="compare the engine against the reference oracle on "
             "generated programs")
    oracle.add_argument("--seed-range", default="0..99",
                        help="inclusive seed range A..B")
    oracle.add_argument("--limits", default="{}",
                        help="JSON object of GeneratorLimits fields")
    oracle.add_argument("--queries-per-program", type=int, default=5)
    return parser


def _cmd_query(args: argparse.Namespace) -> int:
    try:
        session = Session(args.program,
                          budget=args.budget or _env_budget())
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if args.dump_cfg:
        try:
            sys.stdout.write(dump_cfg_text(session, args.dump_cfg))
        except (ResolveError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RESOLVE
        return EXIT_OK

    if not (args.file and args.line and args.var):
        print("error: --file, --line and --var are required", file=sys.stderr)
        return EXIT_ERROR
    try:
        request = QueryRequest(file=args.file, line=args.line,
                               variable=args.var,
                               occurrence=args.occurrence)
        response = run_query(session, request)
    except ResolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOLVE
    except MilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if args.json:
        print(canonical_json(response))
    else:
        query = response.query
        print(f"use of {query.variable} at {args.file}:{args.line} "
              f"({query.method} @{query.instr})")
        if not response.definitions:
            print("no reaching definitions")
        for d in response.definitions:
            note = f"  [{d.note}]" if d.note else ""
            print(f"  {d.file}:{d.line}  {d.method} @{d.instr}  "
                  f"{d.kind}{note}")
        if response.truncated:
            print("warning: traversal budget exhausted; "
                  "result may be incomplete")
    if args.stats:
        print(json.dumps(stats_dict(session)), file=sys.stderr)
    if response.truncated:
        return EXIT_TRUNCATED
    return EXIT_OK if response.definitions else EXIT_EMPTY


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    try:
        session = Session(args.program,
                          budget=args.budget or _env_budget())
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    uvicorn.run(create_app(session), host=args.host, port=args.port,
                log_level="warning")
    return EXIT_OK


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    from .chains import compute_ud_chain
    from .index import build_program_index
    from .oracle import (
        GeneratorLimits,
        OracleBounds,
        OracleBoundsError,
        generate_random_program,
        reference_ud_chain,
    )

    try:
        lo, hi = (int(p) for p in args.seed_range.split(".."))
    except ValueError:
        print("error: --seed-range must be A..B", file=sys.stderr)
        return EXIT_ERROR
    fields = json.loads(args.limits)
    bounds = OracleBounds(max_call_depth=16, max_paths=300_000)
    compared = refused = 0
    for seed in range(lo, hi + 1):
        limits = GeneratorLimits(**{**fields, "seed": seed})
        program, sites, text = generate_random_program(limits)
        index = build_program_index(program)
        step = max(1, len(sites) // args.queries_per_program)
        for use in sites[::step][:args.queries_per_program]:
            try:
                expected = reference_ud_chain(program, use, bounds)
            except OracleBoundsError:
                refused += 1
                continue
            actual = compute_ud_chain(program, index, use).site_set()
            compared += 1
            if actual != expected:
                print(f"mismatch at seed {seed}, use {use.method} "
                      f"@{use.instr_index} {use.variable}")
                print("engine:",
                      sorted((str(m), i) for m, i in actual))
                print("oracle:",
                      sorted((str(m), i) for m, i in expected))
                print(text)
                return EXIT_ERROR
    print(f"ok: {compared} queries compared, {refused} beyond oracle bounds")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "query":
        return _cmd_query(args)
    if args.command == "serve":
        return _cmd_serve(args)
    return _cmd_oracle_check(args)


if __name__ == "__main__":
    sys.exit(main())
