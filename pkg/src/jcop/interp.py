"""Big-step interpreter over (stack, heap, active-layer list) states.

Values are integers, heap addresses, and the undefined marker (bottom).
Expressions are total: anything underdefined evaluates to bottom rather
than failing.  Statements abort exactly when no execution rule applies,
and the abort reason names the rule whose premises could not be met;
where the offending value came from a failed sub-expression, the reason
also names the expression rule that produced bottom.

A fuel budget bounds the number of statement-rule applications; running
out is reported as divergence, not as an abort.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Union

from .classtable import ActiveLayers, ClassTable, apply_layer_expr, build_class_table
from .syntax import (
    ArithOp,
    BExpr,
    BoolLit,
    BoolOp,
    Call,
    Cast,
    Compare,
    Expr,
    FieldAssign,
    FieldRead,
    FunDecl,
    If,
    IntLit,
    LayeredCall,
    Local,
    New,
    ProceedCall,
    Program,
    SeqStmt,
    Span,
    Stmt,
    SuperCall,
    This,
    While,
)

# Rule names used in traces, abort reasons, and tests.
R_FIELD_ASSIGN = ":=_e^s"
R_CALL = ":=_{o.f}^s"
R_LAYERED = ":=_{l.o.f}^s"
R_SUPER = "sup^s"
R_PROCEED = "pro^s"
R_NEW = "new^s"
R_IF = "if^s"
R_WHILE = "while^s"
R_WHILE_STOP = "while_1^s"
R_WHILE_LOOP = "while_2^s"
R_SEQ = "Seq^s"

X_CAST_FAIL = "cast_1^s"
X_CAST_PASS = "cast_2^s"
X_FIELD_HIT = "inst_1^s"
X_FIELD_MISS = "inst_2^s"


class Bottom:
    """The undefined value."""

    _instance: "Bottom | None" = None

    def __new__(cls) -> "Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"


BOT = Bottom()


@dataclass(frozen=True)
class Addr:
    index: int

    def __repr__(self) -> str:
        return f"@{self.index}"


Value = Union[int, Addr, Bottom]


@dataclass(frozen=True)
class ObjectCell:
    class_name: str
    object_id: int
    fields: dict[str, Value]


@dataclass(frozen=True)
class State:
    stack: dict[str, Value]
    heap: dict[int, ObjectCell]
    active: ActiveLayers

    @staticmethod
    def initial() -> "State":
        return State({}, {}, ())

    def bind(self, name: str, value: Value) -> "State":
        stack = dict(self.stack)
        stack[name] = value
        return State(stack, self.heap, self.active)

    def bind_many(self, bindings: dict[str, Value]) -> "State":
        stack = dict(self.stack)
        stack.update(bindings)
        return State(stack, self.heap, self.active)

    def set_cell(self, index: int, cell: ObjectCell) -> "State":
        heap = dict(self.heap)
        heap[index] = cell
        return State(self.stack, heap, self.active)

    def with_active(self, active: ActiveLayers) -> "State":
        return State(self.stack, self.heap, active)

    def cell_at(self, value: Value) -> ObjectCell | None:
        if isinstance(value, Addr) and value.index in self.heap:
            return self.heap[value.index]
        return None


# ------------------------------------------------------------ outcomes


@dataclass(frozen=True)
class Final:
    state: State


@dataclass(frozen=True)
class Abort:
    rule: str
    reason: str
    span: Span | None = None


@dataclass(frozen=True)
class Diverged:
    fuel_spent: int


Outcome = Union[Final, Abort, Diverged]


@dataclass(frozen=True)
class TraceRecord:
    rule: str
    span: str | None
    stack: dict[str, str]
    active: tuple[str, ...]
    heap_delta: dict[str, dict[str, str]]


@dataclass
class RunResult:
    outcome: Outcome
    trace: tuple[TraceRecord, ...]
    rule_counts: dict[str, int]


# --------------------------------------------------------- expressions


def eval_expr(expr: Expr, stack: dict[str, Value],
              heap: dict[int, ObjectCell], table: ClassTable) -> Value:
    """Evaluate an expression; never raises, returns bottom when stuck."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, This):
        return stack.get("this", BOT)
    if isinstance(expr, Local):
        return stack.get(expr.name, BOT)
    if isinstance(expr, ArithOp):
        left = eval_expr(expr.left, stack, heap, table)
        right = eval_expr(expr.right, stack, heap, table)
        if isinstance(left, int) and isinstance(right, int):
            if expr.op == "+":
                return left + right
            if expr.op == "-":
                return left - right
            if expr.op == "*":
                return left * right
        return BOT
    if isinstance(expr, Cast):
        value = eval_expr(expr.operand, stack, heap, table)
        if isinstance(value, Addr) and value.index in heap:
            cell = heap[value.index]
            if not table.subclass_of(cell.class_name, expr.class_name):
                return BOT
        return value
    if isinstance(expr, FieldRead):
        value = eval_expr(expr.obj, stack, heap, table)
        if isinstance(value, Addr) and value.index in heap:
            cell = heap[value.index]
            if (table.class_of_var(cell.class_name, expr.field_name) is not None
                    and expr.field_name in cell.fields):
                return cell.fields[expr.field_name]
        return BOT
    raise ValueError(f"unknown expression node: {expr!r}")


def eval_bexpr(bexpr: BExpr, stack: dict[str, Value],
               heap: dict[int, ObjectCell], table: ClassTable) -> Union[bool, Bottom]:
    """Evaluate a guard; comparisons need integer operands, connectives
    need boolean operands, anything else is bottom."""
    if isinstance(bexpr, BoolLit):
        return bexpr.value
    if isinstance(bexpr, Compare):
        left = eval_expr(bexpr.left, stack, heap, table)
        right = eval_expr(bexpr.right, stack, heap, table)
        if isinstance(left, int) and isinstance(right, int):
            return {
                "<": left < right, "<=": left <= right,
                ">": left > right, ">=": left >= right,
                "==": left == right, "!=": left != right,
            }[bexpr.op]
        return BOT
    if isinstance(bexpr, BoolOp):
        left = eval_bexpr(bexpr.left, stack, heap, table)
        right = eval_bexpr(bexpr.right, stack, heap, table)
        if isinstance(left, bool) and isinstance(right, bool):
            return (left and right) if bexpr.op == "&&" else (left or right)
        return BOT
    raise ValueError(f"unknown boolean node: {bexpr!r}")


def bottom_cause(expr: Expr, stack: dict[str, Value],
                 heap: dict[int, ObjectCell], table: ClassTable) -> str | None:
    """Name the innermost expression rule that made this expression
    bottom, for abort reasons.  None when the value is defined."""
    if isinstance(expr, IntLit):
        return None
    if isinstance(expr, This):
        return None if "this" in stack else "'this' is unbound"
    if isinstance(expr, Local):
        return None if expr.name in stack else f"local {expr.name!r} is unbound"
    if isinstance(expr, ArithOp):
        for side in (expr.left, expr.right):
            cause = bottom_cause(side, stack, heap, table)
            if cause is not None:
                return cause
            if not isinstance(eval_expr(side, stack, heap, table), int):
                return f"i_op: operand {_brief(side)} is not an integer"
        return None
    if isinstance(expr, Cast):
        cause = bottom_cause(expr.operand, stack, heap, table)
        if cause is not None:
            return cause
        value = eval_expr(expr.operand, stack, heap, table)
        if isinstance(value, Addr) and value.index in heap:
            cell = heap[value.index]
            if not table.subclass_of(cell.class_name, expr.class_name):
                return (f"{X_CAST_FAIL}: object of class {cell.class_name} "
                        f"cannot be cast to {expr.class_name}")
        return None
    if isinstance(expr, FieldRead):
        cause = bottom_cause(expr.obj, stack, heap, table)
        if cause is not None:
            return cause
        value = eval_expr(expr.obj, stack, heap, table)
        if not (isinstance(value, Addr) and value.index in heap):
            return f"{X_FIELD_MISS}: {_brief(expr.obj)} is not a heap object"
        cell = heap[value.index]
        if table.class_of_var(cell.class_name, expr.field_name) is None:
            return (f"{X_FIELD_MISS}: class {cell.class_name} has no field "
                    f"{expr.field_name!r}")
        if isinstance(cell.fields.get(expr.field_name, BOT), Bottom):
            return (f"field {expr.field_name!r} of {_brief(expr.obj)} "
                    f"is unassigned")
        return None
    return None


def bexpr_bottom_cause(bexpr: BExpr, stack: dict[str, Value],
                       heap: dict[int, ObjectCell], table: ClassTable) -> str | None:
    if isinstance(bexpr, BoolLit):
        return None
    if isinstance(bexpr, Compare):
        for side in (bexpr.left, bexpr.right):
            cause = bottom_cause(side, stack, heap, table)
            if cause is not None:
                return cause
            if not isinstance(eval_expr(side, stack, heap, table), int):
                return f"c_op: operand {_brief(side)} is not an integer"
        return None
    if isinstance(bexpr, BoolOp):
        for side in (bexpr.left, bexpr.right):
            cause = bexpr_bottom_cause(side, stack, heap, table)
            if cause is not None:
                return cause
        return None
    return None


def _brief(expr: Expr) -> str:
    from .printer import print_expr

    try:
        return print_expr(expr)
    except ValueError:
        return repr(expr)


# ----------------------------------------------------------- rendering


def render_value(value: Value) -> Union[int, str]:
    if isinstance(value, Bottom):
        return "⊥"
    if isinstance(value, Addr):
        return f"@{value.index}"
    return value


def render_state(state: State) -> dict:
    return {
        "stack": {name: render_value(v) for name, v in sorted(state.stack.items())},
        "active": list(state.active),
        "heap": {
            f"@{index}": {
                "class": cell.class_name,
                "id": cell.object_id,
                "fields": {k: render_value(v) for k, v in sorted(cell.fields.items())},
            }
            for index, cell in sorted(state.heap.items())
        },
    }


# ----------------------------------------------------------- execution


class _AbortSignal(Exception):
    def __init__(self, rule: str, reason: str, span: Span | None):
        self.abort = Abort(rule, reason, span)
        super().__init__(reason)


class _OutOfFuel(Exception):
    pass


@dataclass
class _Machine:
    table: ClassTable
    fuel: int
    budget: int
    trace: list[TraceRecord] | None = None
    rule_counts: dict[str, int] = field(default_factory=dict)

    # ------------------------------------------------------- plumbing

    def _tick(self, rule: str) -> None:
        if self.fuel <= 0:
            raise _OutOfFuel()
        self.fuel -= 1
        self.rule_counts[rule] = self.rule_counts.get(rule, 0) + 1

    def _record(self, rule: str, span: Span | None, before: State,
                after: State) -> None:
        if self.trace is None:
            return
        delta: dict[str, dict[str, str]] = {}
        for index, cell in sorted(after.heap.items()):
            if before.heap.get(index) != cell:
                delta[f"@{index}"] = {
                    "class": cell.class_name,
                    "id": str(cell.object_id),
                    "fields": {k: str(render_value(v))
                               for k, v in sorted(cell.fields.items())},
                }
        self.trace.append(TraceRecord(
            rule=rule,
            span=span.start() if span is not None else None,
            stack={name: str(render_value(v))
                   for name, v in sorted(after.stack.items())},
            active=after.active,
            heap_delta=delta,
        ))

    def _abort(self, rule: str, reason: str, span: Span | None) -> None:
        raise _AbortSignal(rule, reason, span)

    # ----------------------------------------------------------- rules

    def exec(self, stmt: Stmt, state: State) -> State:
        if isinstance(stmt, SeqStmt):
            self._tick(R_SEQ)
            self._record(R_SEQ, stmt.span, state, state)
            mid = self.exec(stmt.first, state)
            return self.exec(stmt.second, mid)
        if isinstance(stmt, FieldAssign):
            return self._field_assign(stmt, state)
        if isinstance(stmt, Call):
            return self._call(stmt, state)
        if isinstance(stmt, LayeredCall):
            return self._layered_call(stmt, state)
        if isinstance(stmt, SuperCall):
            return self._super_call(stmt, state)
        if isinstance(stmt, ProceedCall):
            return self._proceed_call(stmt, state)
        if isinstance(stmt, New):
            return self._new(stmt, state)
        if isinstance(stmt, If):
            return self._if(stmt, state)
        if isinstance(stmt, While):
            return self._while(stmt, state)
        raise ValueError(f"unknown statement node: {stmt!r}")

    def _run_body(self, fun: FunDecl, state: State) -> State:
        return self.exec(fun.body, state) if fun.body is not None else state

    def _field_assign(self, stmt: FieldAssign, state: State) -> State:
        self._tick(R_FIELD_ASSIGN)
        target = eval_expr(stmt.target, state.stack, state.heap, self.table)
        cell = state.cell_at(target)
        if cell is None:
            cause = bottom_cause(stmt.target, state.stack, state.heap, self.table)
            detail = f" ({cause})" if cause else ""
            self._abort(R_FIELD_ASSIGN,
                        f"target {_brief(stmt.target)} does not reference a "
                        f"heap object{detail}", stmt.span)
        assert cell is not None and isinstance(target, Addr)
        if self.table.class_of_var(cell.class_name, stmt.field_name) is None:
            self._abort(R_FIELD_ASSIGN,
                        f"class {cell.class_name} has no field "
                        f"{stmt.field_name!r}", stmt.span)
        value = eval_expr(stmt.value, state.stack, state.heap, self.table)
        fields = dict(cell.fields)
        fields[stmt.field_name] = value  # bottom is stored as-is
        after = state.set_cell(target.index,
                               ObjectCell(cell.class_name, cell.object_id, fields))
        self._record(R_FIELD_ASSIGN, stmt.span, state, after)
        return after

    def _receiver_cell(self, rule: str, receiver: str, state: State,
                       span: Span | None) -> tuple[Addr, ObjectCell]:
        value = state.stack.get(receiver, BOT)
        cell = state.cell_at(value)
        if cell is None:
            self._abort(rule, f"receiver {receiver!r} does not reference a "
                              f"heap object", span)
        assert isinstance(value, Addr) and cell is not None
        return value, cell

    def _call(self, stmt: Call, state: State) -> State:
        self._tick(R_CALL)
        addr, cell = self._receiver_cell(R_CALL, stmt.receiver, state, stmt.span)
        fun = self.table.funs_all.get(cell.class_name, {}).get(stmt.fun)
        if fun is None:
            self._abort(R_CALL, f"class {cell.class_name} has no procedure "
                                f"{stmt.fun!r}", stmt.span)
        assert fun is not None
        arg = eval_expr(stmt.arg, state.stack, state.heap, self.table)
        entry = state.bind_many({"this": addr, fun.param: arg})
        out = self._run_body(fun, entry)
        result = eval_expr(fun.ret, out.stack, out.heap, self.table)
        after = out.bind(stmt.target, result)
        self._record(R_CALL, stmt.span, state, after)
        return after

    def _layered_call(self, stmt: LayeredCall, state: State) -> State:
        self._tick(R_LAYERED)
        activated = apply_layer_expr(stmt.layers, state.active)
        addr, cell = self._receiver_cell(R_LAYERED, stmt.receiver, state, stmt.span)
        class_layers = self.table.layers.get(cell.class_name, {})
        selection = [
            name for name in activated
            if name in class_layers and class_layers[name].fun.name == stmt.fun
        ]
        current = state.with_active(activated)
        previous: Value = BOT
        for index, layer_name in enumerate(selection):
            fun = class_layers[layer_name].fun
            bindings: dict[str, Value] = {}
            if index > 0:
                bindings[stmt.target] = previous
            # receiver and argument are re-read in the current state
            bindings["this"] = current.stack.get(stmt.receiver, BOT)
            bindings[fun.param] = eval_expr(stmt.arg, current.stack,
                                            current.heap, self.table)
            out = self._run_body(fun, current.bind_many(bindings))
            previous = eval_expr(fun.ret, out.stack, out.heap, self.table)
            current = out
        if selection:
            current = current.bind(stmt.target, previous)
        # with an empty selection only the activation update survives
        self._record(R_LAYERED, stmt.span, state, current)
        return current

    def _super_call(self, stmt: SuperCall, state: State) -> State:
        self._tick(R_SUPER)
        this_value = state.stack.get("this", BOT)
        cell = state.cell_at(this_value)
        if cell is None:
            self._abort(R_SUPER, "'this' does not reference a heap object",
                        stmt.span)
        assert cell is not None
        parent = self.table.parent_of(cell.class_name)
        if parent is None:
            self._abort(R_SUPER, f"class {cell.class_name} has no superclass",
                        stmt.span)
        assert parent is not None
        owner = self.table.super_lookup(parent, stmt.fun)
        if owner is None:
            self._abort(R_SUPER, f"no class above {cell.class_name} defines "
                                 f"{stmt.fun!r}", stmt.span)
        assert owner is not None
        fun = self.table.funs_direct[owner][stmt.fun]
        arg = eval_expr(stmt.arg, state.stack, state.heap, self.table)
        # the parameter is bound; `this` is left as it is
        out = self._run_body(fun, state.bind(fun.param, arg))
        result = eval_expr(fun.ret, out.stack, out.heap, self.table)
        after = out.bind(stmt.target, result)
        self._record(R_SUPER, stmt.span, state, after)
        return after

    def _proceed_call(self, stmt: ProceedCall, state: State) -> State:
        self._tick(R_PROCEED)
        addr, cell = self._receiver_cell(R_PROCEED, stmt.receiver, state, stmt.span)
        selection = self.table.clslyrs(cell.class_name, stmt.fun, state.active)
        class_layers = self.table.layers.get(cell.class_name, {})
        current = state
        previous: Value = BOT
        for index, layer_name in enumerate(selection):
            fun = class_layers[layer_name].fun
            bindings: dict[str, Value] = {}
            if index > 0:
                bindings[stmt.target] = previous
            # `this` is re-read from the entry stack, not the current one
            bindings["this"] = state.stack.get(stmt.receiver, BOT)
            bindings[fun.param] = eval_expr(stmt.arg, current.stack,
                                            current.heap, self.table)
            out = self._run_body(fun, current.bind_many(bindings))
            previous = eval_expr(fun.ret, out.stack, out.heap, self.table)
            current = out
        if selection:
            current = current.bind(stmt.target, previous)
        self._record(R_PROCEED, stmt.span, state, current)
        return current

    def _new(self, stmt: New, state: State) -> State:
        self._tick(R_NEW)
        if stmt.class_name not in self.table.classes:
            self._abort(R_NEW, f"unknown class {stmt.class_name!r}", stmt.span)
        index = max(state.heap.keys(), default=-1) + 1
        object_id = max((c.object_id for c in state.heap.values()), default=-1) + 1
        fields: dict[str, Value] = {
            name: BOT for name in self.table.fields_all[stmt.class_name]
        }
        cell = ObjectCell(stmt.class_name, object_id, fields)
        after = state.set_cell(index, cell).bind(stmt.target, Addr(index))
        self._record(R_NEW, stmt.span, state, after)
        return after

    def _if(self, stmt: If, state: State) -> State:
        self._tick(R_IF)
        guard = eval_bexpr(stmt.cond, state.stack, state.heap, self.table)
        if isinstance(guard, Bottom):
            cause = bexpr_bottom_cause(stmt.cond, state.stack, state.heap,
                                       self.table)
            detail = f" ({cause})" if cause else ""
            self._abort(R_IF, f"guard is undefined{detail}", stmt.span)
        self._record(R_IF, stmt.span, state, state)
        branch = stmt.then_branch if guard else stmt.else_branch
        return self.exec(branch, state)

    def _while(self, stmt: While, state: State) -> State:
        current = state
        while True:
            guard = eval_bexpr(stmt.cond, current.stack, current.heap, self.table)
            if isinstance(guard, Bottom):
                self._tick(R_WHILE)
                cause = bexpr_bottom_cause(stmt.cond, current.stack,
                                           current.heap, self.table)
                detail = f" ({cause})" if cause else ""
                self._abort(R_WHILE, f"guard is undefined{detail}; neither "
                                     f"{R_WHILE_STOP} nor {R_WHILE_LOOP} applies",
                            stmt.span)
            if not guard:
                self._tick(R_WHILE_STOP)
                self._record(R_WHILE_STOP, stmt.span, current, current)
                return current
            self._tick(R_WHILE_LOOP)
            self._record(R_WHILE_LOOP, stmt.span, current, current)
            current = self.exec(stmt.body, current)


def _ensure_stack_headroom() -> None:
    # an unbounded derivation (e.g. a super call whose lookup keeps
    # selecting the body it sits in) recurses here; give it room, and
    # treat running out of host stack as divergence rather than
    # crashing.  The ceiling stays well under what an 8 MB native stack
    # can carry, since CPython only raises RecursionError at the limit.
    if sys.getrecursionlimit() < 8_000:
        sys.setrecursionlimit(8_000)


def exec_stmt(stmt: Stmt, state: State, table: ClassTable,
              fuel: int = 100_000) -> Outcome:
    """Run one statement to completion against an explicit state."""
    _ensure_stack_headroom()
    machine = _Machine(table=table, fuel=fuel, budget=fuel)
    try:
        return Final(machine.exec(stmt, state))
    except _AbortSignal as sig:
        return sig.abort
    except (_OutOfFuel, RecursionError):
        return Diverged(machine.budget - machine.fuel)


def run_program(program: Program, fuel: int = 100_000,
                trace: bool = False,
                table: ClassTable | None = None) -> RunResult:
    """Build the class table, start from the empty state, run main.

    Locals declared in main populate the typing context only; the stack
    starts empty and names become bound as statements assign them.
    """
    if table is None:
        table = build_class_table(program)
    _ensure_stack_headroom()
    machine = _Machine(table=table, fuel=fuel, budget=fuel,
                       trace=[] if trace else None)
    state = State.initial()
    outcome: Outcome
    try:
        if program.main_body is not None:
            state = machine.exec(program.main_body, state)
        outcome = Final(state)
    except _AbortSignal as sig:
        outcome = sig.abort
    except (_OutOfFuel, RecursionError):
        outcome = Diverged(machine.budget - machine.fuel)
    return RunResult(outcome=outcome,
                     trace=tuple(machine.trace or ()),
                     rule_counts=dict(machine.rule_counts))
