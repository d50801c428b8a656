"""Command line front end.

Exit codes: 0 for success (a run that reaches a final state, a clean
check, a clean fuzz trial), 1 for static failures (parse errors, table
construction errors, diagnostics), 2 for aborted runs and failed fuzz
trials, 3 for runs that exhaust their fuel, 4 for usage errors.

`run` executes without checking first, so ill-typed programs can be
driven into their runtime behavior on purpose; use `check` (or both)
when acceptance matters.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .classtable import BuildError, build_class_table
from .interp import Abort, Diverged, Final, render_state, run_program
from .parser import ParseError, parse_program
from .printer import pretty_print
from .soundness import soundness_trial
from .typecheck import check_program

EXIT_OK = 0
EXIT_STATIC = 1
EXIT_ABORT = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 4

DEFAULT_FUEL = 100_000


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_source(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _parse_or_fail(path: str):
    source = _read_source(path)
    return parse_program(source)


def _print_parse_error(path: str, err: ParseError) -> None:
    print(f"{path}:{err.line}:{err.col}: parse error: {err.message}",
          file=sys.stderr)


def _emit_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, ensure_ascii=False))


def _outcome_exit(outcome) -> int:
    if isinstance(outcome, Final):
        return EXIT_OK
    if isinstance(outcome, Abort):
        return EXIT_ABORT
    return EXIT_DIVERGED


def _print_outcome(outcome, fmt: str) -> None:
    if fmt == "json-lines":
        if isinstance(outcome, Final):
            _emit_json({"event": "final", "state": render_state(outcome.state)})
        elif isinstance(outcome, Abort):
            _emit_json({
                "event": "abort",
                "rule": outcome.rule,
                "reason": outcome.reason,
                "span": outcome.span.start() if outcome.span else None,
            })
        else:
            _emit_json({"event": "diverged", "fuel_spent": outcome.fuel_spent})
        return
    if isinstance(outcome, Final):
        rendered = render_state(outcome.state)
        print("final")
        print("stack:")
        for name, value in rendered["stack"].items():
            print(f"  {name} = {value}")
        print(f"active: {rendered['active']}")
        print("heap:")
        for addr, cell in rendered["heap"].items():
            fields = ", ".join(f"{k}: {v}" for k, v in cell["fields"].items())
            print(f"  {addr} = {cell['class']}#{cell['id']} {{{fields}}}")
    elif isinstance(outcome, Abort):
        where = f" at {outcome.span.start()}" if outcome.span else ""
        print(f"abort [{outcome.rule}]{where}: {outcome.reason}")
    else:
        print(f"diverged: fuel spent {outcome.fuel_spent}")


def cmd_parse(args) -> int:
    try:
        program = _parse_or_fail(args.file)
    except ParseError as err:
        _print_parse_error(args.file, err)
        return EXIT_STATIC
    print(pretty_print(program), end="")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        program = _parse_or_fail(args.file)
    except ParseError as err:
        _print_parse_error(args.file, err)
        return EXIT_STATIC
    report = check_program(program)
    structured = getattr(args, "format", "human") == "json-lines"
    if report.ok:
        if structured:
            _emit_json({"event": "ok", "diagnostics": 0})
        else:
            print("ok")
        return EXIT_OK
    for diagnostic in report.diagnostics:
        if structured:
            span = diagnostic.span
            _emit_json({
                "event": "diagnostic",
                "rule": diagnostic.rule,
                "message": diagnostic.message,
                "file": args.file,
                "line": span.line if span else None,
                "col": span.col if span else None,
            })
        else:
            print(diagnostic.render(args.file))
    return EXIT_STATIC


def _run_common(args, trace: bool) -> int:
    try:
        program = _parse_or_fail(args.file)
    except ParseError as err:
        _print_parse_error(args.file, err)
        return EXIT_STATIC
    try:
        table = build_class_table(program)
    except BuildError as err:
        print(f"{args.file}: [table] {err.message}", file=sys.stderr)
        return EXIT_STATIC
    result = run_program(program, fuel=args.fuel, trace=trace, table=table)
    if trace:
        for i, record in enumerate(result.trace):
            if args.format == "json-lines":
                _emit_json({
                    "event": "step",
                    "index": i,
                    "rule": record.rule,
                    "span": record.span,
                    "active": list(record.active),
                    "stack": record.stack,
                    "heap_delta": record.heap_delta,
                })
            else:
                delta = ""
                if record.heap_delta:
                    delta = " " + json.dumps(record.heap_delta,
                                             sort_keys=True,
                                             ensure_ascii=False)
                active = ",".join(record.active)
                print(f"{i:4d}  {record.rule:14s} {record.span or '-':>8s}"
                      f"  active=[{active}]{delta}")
    _print_outcome(result.outcome, args.format)
    return _outcome_exit(result.outcome)


def cmd_run(args) -> int:
    return _run_common(args, trace=getattr(args, "trace", False))


def cmd_trace(args) -> int:
    return _run_common(args, trace=True)


def cmd_fuzz(args) -> int:
    stats = soundness_trial(args.seed, args.count, fuel=args.fuel,
                            mutate=args.mutate)
    ok = (stats.accepted == stats.programs_generated
          and stats.abort_count == 0
          and stats.mutants_accepted == 0)
    if args.format == "json-lines":
        payload = dataclasses.asdict(stats)
        payload["ok"] = ok
        _emit_json(payload)
    else:
        print(f"programs {stats.programs_generated}, "
              f"accepted {stats.accepted}")
        print(f"final {stats.final_count}, aborts {stats.abort_count}, "
              f"diverged {stats.diverged_count}")
        print(f"statement rules covered: "
              f"{', '.join(sorted(stats.rule_coverage)) or 'none'}")
        if args.mutate:
            print(f"mutants {stats.mutants_generated}, "
                  f"rejected {stats.mutants_rejected}, "
                  f"slipped through {stats.mutants_accepted}, "
                  f"mutant aborts {stats.mutant_abort_count}")
        print("ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_ABORT


def build_arg_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="jcop",
                             description="Layered-language tool chain")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=("human", "json-lines"),
                       default="human")

    p_parse = sub.add_parser("parse", help="parse and reprint a program")
    p_parse.add_argument("file")
    p_parse.set_defaults(handler=cmd_parse)

    p_check = sub.add_parser("check", help="report diagnostics")
    p_check.add_argument("file")
    add_format(p_check)
    p_check.set_defaults(handler=cmd_check)

    p_run = sub.add_parser("run", help="execute a program")
    p_run.add_argument("file")
    p_run.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p_run.add_argument("--trace", action="store_true",
                       help="print each step, like the trace command")
    add_format(p_run)
    p_run.set_defaults(handler=cmd_run)

    p_trace = sub.add_parser("trace", help="execute and print each step")
    p_trace.add_argument("file")
    p_trace.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    add_format(p_trace)
    p_trace.set_defaults(handler=cmd_trace)

    p_fuzz = sub.add_parser("fuzz",
                            help="generate, check and run random programs")
    p_fuzz.add_argument("--seed", type=int, required=True)
    p_fuzz.add_argument("--count", type=int, required=True)
    p_fuzz.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p_fuzz.add_argument("--mutate", action="store_true")
    add_format(p_fuzz)
    p_fuzz.set_defaults(handler=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FileNotFoundError as err:
        print(f"jcop: cannot read {err.filename}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
