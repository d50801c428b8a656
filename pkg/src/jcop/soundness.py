"""Conformance checking and randomized soundness evidence.

`respects` decides whether a runtime state conforms to a typing context:
active layers stay inside the declared bound, every typed stack binding
holds a value of its type, and every heap cell carries exactly its
class's fields with conforming values.  Unbound locals and the undefined
value are deliberately unconstrained; objects start with undefined
fields and the stack starts empty, so the unweakened reading would
reject the initial state of every program.

`generate_program` builds programs that the checker accepts and that
can neither abort nor run forever, by construction:

  * classes form a tree rooted at C0, so every object can be cast to C0;
  * field names are globally unique, which rules out shadowing;
  * all definitions of one function name share one signature, so
    overrides and layer variants agree everywhere;
  * every `new` is followed immediately by one assignment per field,
    and values that could be undefined (call targets) are never read;
  * the stack is shared across calls, so names are kept from colliding:
    receivers inside function bodies are always `this` (its binding can
    then never change within a call tree), locals get globally unique
    names, and each function name gets its own parameter name;
  * function bodies only call functions with a smaller index, `super`
    targets the same name strictly up the chain, and `proceed` targets
    a strictly smaller index, so the call graph is acyclic;
  * loops appear only in main, counting a dedicated field up to a
    constant, with plain field writes in the body.

`preservation_probe` replays a program one top-level statement at a
time and checks conformance after each step, plus a pre-step check that
every typeable subexpression currently evaluates to a value of its
static type (or to the undefined value).

`soundness_trial` wires these together and, in mutation mode, also
verifies that deliberately broken variants get rejected.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .classtable import ClassTable, build_class_table
from .interp import (
    Abort,
    Addr,
    Bottom,
    Diverged,
    Final,
    State,
    Value,
    eval_expr,
    exec_stmt,
    run_program,
)
from .syntax import (
    INT,
    ArithOp,
    BExpr,
    BoolLit,
    BoolOp,
    Call,
    Cast,
    ClassDecl,
    ClassType,
    Compare,
    Expr,
    FieldAssign,
    FieldRead,
    FunDecl,
    If,
    IntLit,
    IntType,
    LayerDecl,
    LayeredCall,
    LayerSeq,
    Local,
    New,
    ProceedCall,
    Program,
    RefType,
    SeqStmt,
    Stmt,
    SuperCall,
    This,
    Type,
    While,
    With,
    ref_to,
    seq_items,
    seq_of,
)
from .typecheck import (
    Context,
    Gamma,
    IllTyped,
    build_context,
    check_program,
    type_expr,
)

# --------------------------------------------------------------- respects


@dataclass(frozen=True)
class ConformanceResult:
    holds: bool
    clause: str | None = None
    witness: str | None = None


def _declared_class(declared: Type) -> str | None:
    if isinstance(declared, RefType) and isinstance(declared.inner, ClassType):
        return declared.inner.name
    return None


def _value_conforms(value: Value, declared: Type, heap, table: ClassTable,
                    exact: bool) -> bool:
    if isinstance(value, Bottom):
        return True
    if isinstance(declared, IntType):
        return isinstance(value, int)
    cls = _declared_class(declared)
    if cls is None:
        return False
    if not isinstance(value, Addr) or value.index not in heap:
        return False
    cell = heap[value.index]
    if exact:
        return cell.class_name == cls
    return table.subclass_of(cell.class_name, cls)


def respects(state: State, gamma: Gamma, layer_bound, table: ClassTable,
             exact_class: bool = False) -> ConformanceResult:
    """First violated clause wins, in a deterministic order: the
    activation bound, then stack bindings by name, then heap cells by
    address (declared class, field domain, field values)."""
    bound = set(layer_bound)
    for layer in state.active:
        if layer not in bound:
            return ConformanceResult(False, "a",
                                     f"active layer {layer!r} is not declared")
    for name in sorted(state.stack):
        if name not in gamma:
            continue  # untyped binding: unconstrained
        value = state.stack[name]
        if not _value_conforms(value, gamma[name], state.heap, table,
                               exact_class):
            return ConformanceResult(
                False, "b", f"local {name!r} holds {value!r}")
    for index in sorted(state.heap):
        cell = state.heap[index]
        if cell.class_name not in table.classes:
            return ConformanceResult(
                False, "c",
                f"@{index} has undeclared class {cell.class_name!r}")
        declared_fields = table.fields_all[cell.class_name]
        for fname in sorted(declared_fields):
            if fname not in cell.fields:
                return ConformanceResult(
                    False, "d-6.2a",
                    f"@{index} is missing field {fname!r}")
        for fname in sorted(cell.fields):
            if fname not in declared_fields:
                return ConformanceResult(
                    False, "d-6.2a",
                    f"@{index} carries undeclared field {fname!r}")
        for fname in sorted(cell.fields):
            owner = table.class_of_var(cell.class_name, fname)
            declared = gamma.get((owner, fname))
            if declared is None:
                continue  # untyped field: unconstrained
            value = cell.fields[fname]
            if not _value_conforms(value, declared, state.heap, table,
                                   exact_class):
                return ConformanceResult(
                    False, "d-6.2b",
                    f"@{index}.{fname} holds {value!r}")
    return ConformanceResult(True)


# ------------------------------------------------------------- generator


_INT = INT
_ARITH_OPS = ("+", "-", "*")
_CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


class _Gen:
    def __init__(self, rng: random.Random, budget: int):
        self.rng = rng
        self.budget = budget
        self.classes: list[str] = []
        self.parents: dict[str, str | None] = {}
        self.fields: dict[str, list[tuple[str, Type]]] = {}
        self.counter_fields: list[str] = []
        self.sigs: dict[str, tuple[Type, Type]] = {}
        self.fun_names: list[str] = []
        self.base_defs: dict[str, list[str]] = {}  # class -> fun names
        self.layer_defs: dict[str, list[tuple[str, str]]] = {}  # cls -> (layer, fun)
        self.layer_names: list[str] = []
        self.next_field = 0
        self.next_local = 0  # fun locals share one flat stack at runtime
        # `super` resolves from the receiver's dynamic class, so a body
        # holding one can re-select itself forever.  Bodies get built
        # ancestors-first; a super is only emitted when the body it
        # resolves to is already known to contain none, and (for class
        # definitions) when no proper subclass can inherit this body.
        self.super_free: dict[tuple[str, str], bool] = {}
        self.descendants: dict[str, list[str]] = {}

    # ----- declaration-shape decisions

    def _fresh_field(self, declared: Type) -> tuple[str, Type]:
        name = f"F{self.next_field}"
        self.next_field += 1
        return (name, declared)

    def plan(self) -> None:
        rng = self.rng
        n_classes = 1 + min(3, self.budget // 8)
        for i in range(n_classes):
            name = f"C{i}"
            self.classes.append(name)
            self.parents[name] = None if i == 0 else rng.choice(self.classes[:i])
            self.fields[name] = []
            self.base_defs[name] = []
            self.layer_defs[name] = []
        # C0 always carries one plain int field so every object has a
        # readable number, plus the loop counters.
        self.fields["C0"].append(self._fresh_field(_INT))
        for _ in range(2):
            cnt = self._fresh_field(_INT)
            self.fields["C0"].append(cnt)
            self.counter_fields.append(cnt[0])
        for cls in self.classes:
            for _ in range(rng.randint(1, 2)):
                declared = _INT if rng.random() < 0.7 else ref_to("C0")
                self.fields[cls].append(self._fresh_field(declared))
        n_funs = min(6, self.budget // 5)
        for i in range(n_funs):
            name = f"g{i}"
            self.fun_names.append(name)
            param = _INT if rng.random() < 0.6 else ref_to("C0")
            ret = _INT if rng.random() < 0.6 else ref_to("C0")
            self.sigs[name] = (param, ret)
            hosts = rng.sample(self.classes,
                               rng.randint(1, min(2, len(self.classes))))
            for cls in hosts:
                self.base_defs[cls].append(name)
        n_layers = min(4, self.budget // 8)
        if self.fun_names:
            for i in range(n_layers):
                layer = f"Ly{i}"
                open_classes = [c for c in self.classes
                                if len(self.layer_defs[c]) < 3]
                if not open_classes:
                    break
                cls = rng.choice(open_classes)
                fun = rng.choice(self.fun_names)
                self.layer_names.append(layer)
                self.layer_defs[cls].append((layer, fun))

    # ----- lookup helpers over the planned shape

    def _chain(self, cls: str) -> list[str]:
        out = []
        cur: str | None = cls
        while cur is not None:
            out.append(cur)
            cur = self.parents[cur]
        return out

    def all_fields(self, cls: str) -> list[tuple[str, Type]]:
        out: list[tuple[str, Type]] = []
        for link in reversed(self._chain(cls)):
            out.extend(self.fields[link])
        return out

    def int_fields(self, cls: str) -> list[str]:
        return [name for name, declared in self.all_fields(cls)
                if declared == _INT and name not in self.counter_fields]

    def ref_fields(self, cls: str) -> list[str]:
        return [name for name, declared in self.all_fields(cls)
                if declared != _INT]

    def has_base(self, cls: str, fun: str) -> bool:
        return any(fun in self.base_defs[link] for link in self._chain(cls))

    def nearest_base_above(self, cls: str, fun: str) -> str | None:
        for link in self._chain(cls)[1:]:
            if fun in self.base_defs[link]:
                return link
        return None

    def super_is_safe(self, cls: str, fun: str, in_layer: bool) -> bool:
        """A super call here can never loop: the body it resolves to is
        super-free, and (for a class's own body, which subclasses can
        inherit and run with a deeper dynamic class) every proper
        descendant shadows this definition."""
        above = self.nearest_base_above(cls, fun)
        if above is None or not self.super_free.get((above, fun), False):
            return False
        if in_layer:
            return True  # layer bodies only run for their exact class
        return all(fun in self.base_defs[d] for d in self.descendants[cls])

    # ----- expression pools (never evaluate to the undefined value)

    def int_expr(self, readables: list[tuple[Expr, str]],
                 extra: list[Expr], depth: int = 0) -> Expr:
        """readables: (object expression, class) pairs whose fields are
        all initialized; extra: known-int atoms such as an int param."""
        rng = self.rng
        atoms: list[Expr] = [IntLit(rng.randint(0, 9))]
        atoms.extend(extra)
        for obj, cls in readables:
            for fname in self.int_fields(cls):
                atoms.append(FieldRead(obj, fname))
        pick = rng.choice(atoms)
        if depth == 0 and rng.random() < 0.4:
            return ArithOp(pick, rng.choice(_ARITH_OPS),
                           self.int_expr(readables, extra, depth + 1))
        return pick

    def ref_expr(self, objects: list[tuple[Expr, str]]) -> Expr:
        obj, cls = self.rng.choice(objects)
        if cls == "C0" and isinstance(obj, Local) and self.rng.random() < 0.6:
            return obj
        return Cast("C0", obj)

    def guard(self, readables: list[tuple[Expr, str]],
              extra: list[Expr]) -> BExpr:
        rng = self.rng
        roll = rng.random()
        if roll < 0.1:
            return BoolLit(rng.random() < 0.5)
        left = self.int_expr(readables, extra, depth=1)
        right = self.int_expr(readables, extra, depth=1)
        cmp = Compare(left, rng.choice(_CMP_OPS), right)
        if roll < 0.25:
            other = Compare(self.int_expr(readables, extra, depth=1),
                            rng.choice(_CMP_OPS), IntLit(rng.randint(0, 9)))
            return BoolOp(cmp, rng.choice(("&&", "||")), other)
        return cmp

    # ----- statement builders

    def init_block(self, target_expr: Expr, cls: str,
                   objects: list[tuple[Expr, str]],
                   readables: list[tuple[Expr, str]],
                   extra_ints: list[Expr]) -> list[Stmt]:
        """One assignment per field, straight after a `new`."""
        out: list[Stmt] = []
        for fname, declared in self.all_fields(cls):
            if declared == _INT:
                value: Expr = (IntLit(self.rng.randint(0, 9))
                               if not readables and not extra_ints
                               else self.int_expr(readables, extra_ints,
                                                  depth=1))
                out.append(FieldAssign(target_expr, fname, value))
            else:
                out.append(FieldAssign(target_expr, fname,
                                       self.ref_expr(objects)))
        return out

    def field_write(self, objects: list[tuple[Expr, str]],
                    readables: list[tuple[Expr, str]],
                    extra_ints: list[Expr]) -> Stmt | None:
        rng = self.rng
        obj, cls = rng.choice(objects)
        ints = self.int_fields(cls)
        refs = self.ref_fields(cls)
        choices: list[tuple[str, Type]] = ([(f, _INT) for f in ints]
                                           + [(f, ref_to("C0")) for f in refs])
        if not choices:
            return None
        fname, declared = rng.choice(choices)
        if declared == _INT:
            return FieldAssign(obj, fname,
                               self.int_expr(readables, extra_ints))
        return FieldAssign(obj, fname, self.ref_expr(objects))

    def arg_for(self, fun: str, objects, readables, extra_ints) -> Expr:
        param, _ = self.sigs[fun]
        if param == _INT:
            return self.int_expr(readables, extra_ints, depth=1)
        return self.ref_expr(objects)

    def target_for(self, fun: str, int_targets: list[str],
                   ref_targets: list[str]) -> str | None:
        _, ret = self.sigs[fun]
        pool = int_targets if ret == _INT else ref_targets
        if not pool:
            return None
        return self.rng.choice(pool)

    # ----- function bodies

    def build_fun(self, cls: str, fun: str, fun_index: int,
                  in_layer: bool) -> FunDecl:
        rng = self.rng
        param, ret = self.sigs[fun]
        pname = f"p{fun_index}"  # one parameter name per function name
        locals_: list[tuple[str, Type]] = []
        stmts: list[Stmt] = []
        objects: list[tuple[Expr, str]] = [(This(), cls)]
        readables: list[tuple[Expr, str]] = [(This(), cls)]
        extra_ints: list[Expr] = [Local(pname)] if param == _INT else []
        if param != _INT:
            # A reference parameter is always bound to a live, fully
            # initialized object by the call discipline.
            objects.append((Local(pname), "C0"))
            readables.append((Local(pname), "C0"))

        def fresh_local(declared: Type) -> str:
            name = f"q{self.next_local}"
            self.next_local += 1
            locals_.append((name, declared))
            return name

        if rng.random() < 0.3 and self.budget >= 8:
            inner_cls = rng.choice(self.classes)
            qname = fresh_local(ref_to(inner_cls))
            stmts.append(New(qname, inner_cls))
            stmts.extend(self.init_block(Local(qname), inner_cls, objects,
                                         readables, extra_ints))
            objects.append((Local(qname), inner_cls))
            readables.append((Local(qname), inner_cls))

        int_targets: list[str] = []
        ref_targets: list[str] = []

        def ensure_target(fun_name: str) -> str:
            _, r = self.sigs[fun_name]
            pool = int_targets if r == _INT else ref_targets
            if not pool:
                pool.append(fresh_local(_INT if r == _INT else ref_to("C0")))
            return pool[0]

        smaller = self.fun_names[:fun_index]
        callable_smaller = [g for g in smaller if self.has_base(cls, g)]
        has_super = False
        for _ in range(rng.randint(0, 2)):
            roll = rng.random()
            if roll < 0.45:
                stmt = self.field_write(objects, readables, extra_ints)
                if stmt is not None:
                    stmts.append(stmt)
            elif roll < 0.7 and callable_smaller:
                callee = rng.choice(callable_smaller)
                stmts.append(Call(ensure_target(callee), "this", callee,
                                  self.arg_for(callee, objects, readables,
                                               extra_ints)))
            elif roll < 0.85 and smaller:
                callee = rng.choice(smaller)
                stmts.append(ProceedCall(ensure_target(callee), "this",
                                         callee,
                                         self.arg_for(callee, objects,
                                                      readables, extra_ints)))
            elif self.super_is_safe(cls, fun, in_layer):
                has_super = True
                stmts.append(SuperCall(ensure_target(fun), fun,
                                       self.arg_for(fun, objects, readables,
                                                    extra_ints)))

        if not in_layer:
            self.super_free[(cls, fun)] = not has_super
        if ret == _INT:
            ret_expr = self.int_expr(readables, extra_ints, depth=1)
        else:
            ret_expr = self.ref_expr(objects)
        return FunDecl(fun, pname, param, tuple(locals_), seq_of(stmts),
                       ret_expr)

    # ----- main body

    def build_main(self) -> tuple[list[tuple[str, Type]], list[Stmt]]:
        rng = self.rng
        locals_: list[tuple[str, Type]] = []
        stmts: list[Stmt] = []
        objects: list[tuple[Expr, str]] = []
        readables: list[tuple[Expr, str]] = []
        for i, cls in enumerate(self.classes):
            name = f"v{i}"
            locals_.append((name, ref_to(cls)))
        int_targets: list[str] = []
        ref_targets: list[str] = []
        if self.fun_names:
            for i in range(2):
                int_targets.append(f"t{i}")
                locals_.append((f"t{i}", _INT))
                ref_targets.append(f"u{i}")
                locals_.append((f"u{i}", ref_to("C0")))
        for i, cls in enumerate(self.classes):
            name = f"v{i}"
            stmts.append(New(name, cls))
            # the first object can only point at itself
            pool = objects if objects else [(Local(name), cls)]
            stmts.extend(self.init_block(Local(name), cls, pool, readables,
                                         []))
            objects.append((Local(name), cls))
            readables.append((Local(name), cls))

        counters = list(self.counter_fields)
        slots = max(0, min(30, self.budget - 2 * len(self.classes)))

        def simple_write() -> Stmt | None:
            return self.field_write(objects, readables, [])

        def call_sites() -> list[tuple[str, str, str]]:
            out = []
            for obj, cls in objects:
                assert isinstance(obj, Local)
                for g in self.fun_names:
                    if self.has_base(cls, g):
                        out.append((obj.name, cls, g))
            return out

        def rand_call() -> Stmt | None:
            sites = call_sites()
            if not sites:
                return None
            recv, _, g = rng.choice(sites)
            target = self.target_for(g, int_targets, ref_targets)
            if target is None:
                return None
            return Call(target, recv, g,
                        self.arg_for(g, objects, readables, []))

        def rand_layered() -> Stmt | None:
            if not self.layer_names or not self.fun_names:
                return None
            picks = rng.sample(self.layer_names,
                               rng.randint(1, min(2, len(self.layer_names))))
            expr = With(picks[0])
            for extra in picks[1:]:
                expr = LayerSeq(expr, With(extra))
            obj, _ = rng.choice(objects)
            g = rng.choice(self.fun_names)
            target = self.target_for(g, int_targets, ref_targets)
            if target is None:
                return None
            return LayeredCall(target, expr, obj.name, g,
                               self.arg_for(g, objects, readables, []))

        def rand_proceed() -> Stmt | None:
            if not self.fun_names:
                return None
            obj, _ = rng.choice(objects)
            g = rng.choice(self.fun_names)
            target = self.target_for(g, int_targets, ref_targets)
            if target is None:
                return None
            return ProceedCall(target, obj.name, g,
                               self.arg_for(g, objects, readables, []))

        def rand_if() -> Stmt:
            def branch() -> Stmt:
                body: list[Stmt] = []
                for _ in range(rng.randint(1, 2)):
                    pick = simple_write() if rng.random() < 0.7 else rand_call()
                    if pick is None:
                        pick = simple_write()
                    if pick is not None:
                        body.append(pick)
                if not body:
                    body.append(FieldAssign(Local("v0"),
                                            self.int_fields("C0")[0],
                                            IntLit(0)))
                return seq_of(body)
            return If(self.guard(readables, []), branch(), branch())

        def rand_while() -> Stmt | None:
            if not counters:
                return None
            cnt = counters.pop()
            obj, _ = rng.choice(objects)
            assert isinstance(obj, Local)
            limit = rng.randint(1, 8)
            body: list[Stmt] = [FieldAssign(obj, cnt,
                                            ArithOp(FieldRead(obj, cnt), "+",
                                                    IntLit(1)))]
            for _ in range(rng.randint(0, 2)):
                extra = simple_write()
                if extra is not None:
                    body.append(extra)
            reset = FieldAssign(obj, cnt, IntLit(0))
            loop = While(Compare(FieldRead(obj, cnt), "<", IntLit(limit)),
                         seq_of(body))
            return seq_of([reset, loop])

        for _ in range(slots):
            roll = rng.random()
            stmt: Stmt | None
            if roll < 0.35:
                stmt = simple_write()
            elif roll < 0.55:
                stmt = rand_call()
            elif roll < 0.65:
                stmt = rand_layered()
            elif roll < 0.70:
                stmt = rand_proceed()
            elif roll < 0.85:
                stmt = rand_if()
            else:
                stmt = rand_while()
            if stmt is not None:
                stmts.append(stmt)
        return locals_, stmts

    def build(self) -> Program:
        self.plan()
        if not self.classes:
            return Program((), (), None)
        self.descendants = {cls: [] for cls in self.classes}
        for cls in self.classes:
            for link in self._chain(cls)[1:]:
                self.descendants[link].append(cls)
        decls: list[ClassDecl] = []
        for cls in self.classes:
            funs = tuple(
                self.build_fun(cls, g, self.fun_names.index(g),
                               in_layer=False)
                for g in self.base_defs[cls])
            layers = tuple(
                LayerDecl(layer,
                          self.build_fun(cls, g, self.fun_names.index(g),
                                         in_layer=True))
                for layer, g in self.layer_defs[cls])
            decls.append(ClassDecl(cls, self.parents[cls],
                                   tuple(self.fields[cls]), funs, layers))
        main_locals, main_stmts = self.build_main()
        return Program(tuple(decls), tuple(main_locals), seq_of(main_stmts))


def generate_program(seed: int, size_budget: int) -> Program:
    """Deterministic in (seed, size_budget).  A budget of 1 yields the
    empty program; larger budgets scale the number of declarations and
    statements roughly linearly."""
    rng = random.Random(f"{seed}/{size_budget}")
    if size_budget <= 1:
        return Program((), (), None)
    return _Gen(rng, size_budget).build()


# ----------------------------------------------------------------- probe


@dataclass(frozen=True)
class Violation:
    step: int
    clause: str
    witness: str


@dataclass(frozen=True)
class ProbeResult:
    steps: int
    outcome: str  # "final", "abort:<rule>", or "diverged"
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _stmt_exprs(stmt: Stmt) -> list[Expr]:
    """Expressions a statement evaluates directly (guards contribute
    their integer operands)."""
    def bexpr_parts(b: BExpr) -> list[Expr]:
        if isinstance(b, Compare):
            return [b.left, b.right]
        if isinstance(b, BoolOp):
            return bexpr_parts(b.left) + bexpr_parts(b.right)
        return []

    if isinstance(stmt, FieldAssign):
        return [stmt.target, stmt.value]
    if isinstance(stmt, (Call, LayeredCall, ProceedCall)):
        return [Local(stmt.receiver) if stmt.receiver != "this" else This(),
                stmt.arg]
    if isinstance(stmt, SuperCall):
        return [stmt.arg]
    if isinstance(stmt, (If, While)):
        return bexpr_parts(stmt.cond)
    return []


def preservation_probe(program: Program, fuel: int = 100_000) -> ProbeResult:
    """Runs main one top-level statement at a time.  After each step the
    state must respect the declaration context with `this` and all
    parameter names removed (their bindings outlive calls on the shared
    stack and are not governed by the context).  Before each step, every
    subexpression that types under that context must currently evaluate
    to a value of its static type, or to the undefined value."""
    table = build_class_table(program)
    ctx, _ = build_context(program, table)
    dropped = {"this"}
    for cls in program.classes:
        for fun in cls.funs:
            dropped.add(fun.param)
        for layer in cls.layers:
            dropped.add(layer.fun.param)
    gamma = {key: declared for key, declared in ctx.gamma.items()
             if not (isinstance(key, str) and key in dropped)}
    probe_ctx = Context(gamma, ctx.layers)

    violations: list[Violation] = []
    state = State.initial()
    steps = 0
    outcome = "final"
    for stmt in seq_items(program.main_body):
        for expr in _stmt_exprs(stmt):
            try:
                declared = type_expr(probe_ctx, expr, table)
            except IllTyped:
                continue
            value = eval_expr(expr, state.stack, state.heap, table)
            if not _value_conforms(value, declared, state.heap, table,
                                   exact=False):
                violations.append(Violation(
                    steps, "expr",
                    f"expression of static type {declared!r} evaluated "
                    f"to {value!r}"))
        result = exec_stmt(stmt, state, table, fuel=fuel)
        if isinstance(result, Abort):
            outcome = f"abort:{result.rule}"
            break
        if isinstance(result, Diverged):
            outcome = "diverged"
            break
        assert isinstance(result, Final)
        state = result.state
        steps += 1
        check = respects(state, gamma, table.layer_names, table)
        if not check.holds:
            violations.append(Violation(steps, check.clause or "?",
                                        check.witness or ""))
    return ProbeResult(steps, outcome, tuple(violations))


# ----------------------------------------------------------------- trial


@dataclass(frozen=True)
class TrialStats:
    seed: int
    programs_generated: int
    accepted: int
    final_count: int
    abort_count: int
    diverged_count: int
    rule_coverage: dict[str, int]
    mutants_generated: int = 0
    mutants_rejected: int = 0
    mutants_accepted: int = 0
    mutant_abort_count: int = 0


def _rewrite_stmts(stmt: Stmt | None, fn) -> Stmt | None:
    """Bottom-up statement rewrite; fn sees every statement node."""
    if stmt is None:
        return None
    if isinstance(stmt, SeqStmt):
        rebuilt = SeqStmt(_rewrite_stmts(stmt.first, fn),
                          _rewrite_stmts(stmt.second, fn))
        return fn(rebuilt)
    if isinstance(stmt, If):
        rebuilt = replace(stmt,
                          then_branch=_rewrite_stmts(stmt.then_branch, fn),
                          else_branch=_rewrite_stmts(stmt.else_branch, fn))
        return fn(rebuilt)
    if isinstance(stmt, While):
        return fn(replace(stmt, body=_rewrite_stmts(stmt.body, fn)))
    return fn(stmt)


class _Mutator:
    """Applies the first matching edit of the chosen kind; each kind is
    guaranteed to leave the program ill-typed."""

    def __init__(self, program: Program):
        self.program = program
        self.ref_local = next(
            (name for name, declared in program.main_locals
             if isinstance(declared, RefType)), None)

    def _edit_main(self, fn) -> Program | None:
        done = [False]

        def wrapper(stmt: Stmt) -> Stmt:
            if done[0]:
                return stmt
            out = fn(stmt)
            if out is not None:
                done[0] = True
                return out
            return stmt

        body = _rewrite_stmts(self.program.main_body, wrapper)
        if not done[0]:
            return None
        return replace(self.program, main_body=body)

    def missing_procedure(self) -> Program | None:
        return self._edit_main(
            lambda s: replace(s, fun="nosuchfun")
            if isinstance(s, Call) else None)

    def unknown_new_class(self) -> Program | None:
        return self._edit_main(
            lambda s: replace(s, class_name="Zmissing")
            if isinstance(s, New) else None)

    def ref_in_comparison(self) -> Program | None:
        if self.ref_local is None:
            return None

        def edit(stmt: Stmt) -> Stmt | None:
            if isinstance(stmt, (If, While)) and isinstance(stmt.cond, Compare):
                bad = replace(stmt.cond, left=Local(self.ref_local))
                return replace(stmt, cond=bad)
            return None

        return self._edit_main(edit)

    def ref_into_int_field(self) -> Program | None:
        if self.ref_local is None:
            return None
        return self._edit_main(
            lambda s: replace(s, value=Local(self.ref_local))
            if isinstance(s, FieldAssign) and isinstance(s.value, IntLit)
            else None)

    def swapped_target(self) -> Program | None:
        int_locals = {name for name, declared in self.program.main_locals
                      if declared == _INT}
        ref_locals = [name for name, declared in self.program.main_locals
                      if isinstance(declared, RefType)]
        if not int_locals or not ref_locals:
            return None

        def edit(stmt: Stmt) -> Stmt | None:
            if isinstance(stmt, Call) and stmt.target in int_locals:
                return replace(stmt, target=ref_locals[0])
            return None

        return self._edit_main(edit)

    def mutate(self, rng: random.Random) -> Program | None:
        kinds = [self.missing_procedure, self.unknown_new_class,
                 self.ref_in_comparison, self.ref_into_int_field,
                 self.swapped_target]
        rng.shuffle(kinds)
        for kind in kinds:
            mutant = kind()
            if mutant is not None:
                return mutant
        return None


def soundness_trial(seed: int, count: int, fuel: int = 100_000,
                    mutate: bool = False) -> TrialStats:
    """Generates `count` programs, checks each, runs the accepted ones,
    and aggregates outcomes.  With mutate=True each program also spawns
    one deliberately broken variant that the checker must reject; a
    mutant that slips through is run, and any abort it produces is
    counted as a soundness failure."""
    trial_rng = random.Random(f"trial/{seed}")
    mutant_rng = random.Random(f"mutant/{seed}")
    accepted = final_count = abort_count = diverged_count = 0
    mutants_generated = mutants_rejected = mutants_accepted = 0
    mutant_abort_count = 0
    coverage: dict[str, int] = {}
    for _ in range(count):
        sub_seed = trial_rng.randrange(2 ** 32)
        budget = trial_rng.randint(1, 40)
        program = generate_program(sub_seed, budget)
        report = check_program(program)
        if report.ok:
            accepted += 1
            result = run_program(program, fuel=fuel)
            for rule, ticks in result.rule_counts.items():
                coverage[rule] = coverage.get(rule, 0) + ticks
            if isinstance(result.outcome, Final):
                final_count += 1
            elif isinstance(result.outcome, Abort):
                abort_count += 1
            else:
                diverged_count += 1
        if mutate:
            mutant = _Mutator(program).mutate(mutant_rng)
            if mutant is not None:
                mutants_generated += 1
                if check_program(mutant).ok:
                    mutants_accepted += 1
                    outcome = run_program(mutant, fuel=fuel).outcome
                    if isinstance(outcome, Abort):
                        mutant_abort_count += 1
                else:
                    mutants_rejected += 1
    return TrialStats(seed, count, accepted, final_count, abort_count,
                      diverged_count, coverage, mutants_generated,
                      mutants_rejected, mutants_accepted, mutant_abort_count)
