"""A small class-based language with layers: dynamically activated
bundles of procedure variants that stack on top of a class's own
definitions.  The package provides the abstract syntax, a parser and
printer, a class table with the lookup rules, a big-step interpreter
whose expressions never fail (an in-band undefined value stands in for
every stuck case) and whose statements abort with the name of the rule
that got stuck, a static checker, and a random-program harness that
backs the no-abort claim for checked programs.
"""

from .classtable import (
    ActiveLayers,
    BuildError,
    ClassTable,
    apply_layer_expr,
    build_class_table,
)
from .interp import (
    BOT,
    Abort,
    Addr,
    Bottom,
    Diverged,
    Final,
    ObjectCell,
    Outcome,
    RunResult,
    State,
    TraceRecord,
    Value,
    eval_bexpr,
    eval_expr,
    exec_stmt,
    render_state,
    render_value,
    run_program,
)
from .parser import ParseError, parse_expr, parse_program, parse_stmt
from .printer import pretty_print, print_expr, print_layer_expr, print_type
from .soundness import (
    ConformanceResult,
    ProbeResult,
    TrialStats,
    Violation,
    generate_program,
    preservation_probe,
    respects,
    soundness_trial,
)
from .typecheck import (
    Checker,
    Context,
    Diagnostic,
    IllTyped,
    TypeReport,
    build_context,
    check_program,
    type_bexpr,
    type_expr,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveLayers",
    "BuildError",
    "ClassTable",
    "apply_layer_expr",
    "build_class_table",
    "BOT",
    "Abort",
    "Addr",
    "Bottom",
    "Diverged",
    "Final",
    "ObjectCell",
    "Outcome",
    "RunResult",
    "State",
    "TraceRecord",
    "Value",
    "eval_bexpr",
    "eval_expr",
    "exec_stmt",
    "render_state",
    "render_value",
    "run_program",
    "ParseError",
    "parse_expr",
    "parse_program",
    "parse_stmt",
    "pretty_print",
    "print_expr",
    "print_layer_expr",
    "print_type",
    "ConformanceResult",
    "ProbeResult",
    "TrialStats",
    "Violation",
    "generate_program",
    "preservation_probe",
    "respects",
    "soundness_trial",
    "Checker",
    "Context",
    "Diagnostic",
    "IllTyped",
    "TypeReport",
    "build_context",
    "check_program",
    "type_bexpr",
    "type_expr",
    "__version__",
]
