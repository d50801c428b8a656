"""Static checker for the language.

The typing context maps local names and (class, field) pairs to either
``int`` or a class reference; nothing else may be declared.  Casts only
move up the class hierarchy.  Call statements require the argument type
to sit below the parameter type and the callee's return type to sit
below the target variable's type.  Function redefinitions along the
inheritance chain must keep the parameter type and may only narrow the
return type; the definitions of one function name hosted by the layers
of a class must share one parameter type and one return bound, and
because reference types relate only to themselves that bound degenerates
to equality.

Layered calls additionally require the layer expression to preserve the
static layer set (activating a declared layer changes nothing; a net
`without` is rejected, which is checked literally and has a dedicated
regression test).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .classtable import BuildError, ClassTable, apply_layer_expr, build_class_table
from .printer import print_expr, print_type
from .syntax import (
    INT,
    ArithOp,
    BExpr,
    BoolLit,
    BoolOp,
    Call,
    Cast,
    ClassType,
    Compare,
    Expr,
    FieldAssign,
    FieldRead,
    FunDecl,
    FunType,
    If,
    IntLit,
    IntType,
    LayeredCall,
    Local,
    New,
    ProceedCall,
    Program,
    RefType,
    SeqStmt,
    Span,
    Stmt,
    SuperCall,
    This,
    Type,
    While,
    ref_to,
)

# Rule names carried by diagnostics.
T_VAR = "o^t"
T_ARITH = "i_op^t"
T_COMPARE = "c_op^t"
T_CAST_INT = "cast_1^t"
T_CAST_REF = "cast_2^t"
T_FIELD = "e.v^t"
T_DECL = "decl^t"
T_CLASS_FUN = "C.f^t"
T_LAYER_FUN = "C.f.l^t"
T_FIELD_ASSIGN = ":=_e^t"
T_CALL = ":=_{o.f}^t"
T_LAYERED = ":=_{l.o.f}^t"
T_SUPER = "sup^t"
T_PROCEED = "pro^t"
T_NEW = "new^t"
T_TABLE = "table"

Gamma = dict[Union[str, tuple[str, str]], Type]


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    span: Span | None = None

    def render(self, filename: str = "<input>") -> str:
        where = f"{self.span.line}:{self.span.col}" if self.span else "-"
        return f"{filename}:{where}: [{self.rule}] {self.message}"


@dataclass(frozen=True)
class TypeReport:
    diagnostics: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def rules(self) -> set[str]:
        return {d.rule for d in self.diagnostics}


@dataclass(frozen=True)
class Context:
    gamma: Gamma
    layers: frozenset[str]

    def extend(self, more: Gamma) -> "Context":
        merged = dict(self.gamma)
        merged.update(more)
        return Context(merged, self.layers)


class IllTyped(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


def _valid_decl_type(declared: Type) -> bool:
    if isinstance(declared, IntType):
        return True
    return isinstance(declared, RefType) and isinstance(declared.inner, ClassType)


def build_context(program: Program,
                  table: ClassTable) -> tuple[Context, tuple[Diagnostic, ...]]:
    """Typing context from declarations: every field keyed by its
    declaring class, plus the locals of main.  Declarations whose type
    cannot inhabit the context (bool, function types) are diagnosed and
    left out."""
    gamma: Gamma = {}
    diags: list[Diagnostic] = []
    for cls in program.classes:
        for name, declared in cls.fields:
            if not _valid_decl_type(declared):
                diags.append(Diagnostic(
                    T_DECL,
                    f"field {cls.name}.{name} cannot be declared "
                    f"{print_type(declared)}: only int and class references "
                    f"are allowed", cls.span))
                continue
            gamma[(cls.name, name)] = declared
    for name, declared in program.main_locals:
        if not _valid_decl_type(declared):
            diags.append(Diagnostic(
                T_DECL,
                f"local {name!r} cannot be declared {print_type(declared)}: "
                f"only int and class references are allowed", program.span))
            continue
        gamma[name] = declared
    return Context(gamma, frozenset(table.layer_names)), tuple(diags)


def _class_of(declared: Type) -> str | None:
    if isinstance(declared, RefType) and isinstance(declared.inner, ClassType):
        return declared.inner.name
    return None


def type_expr(ctx: Context, expr: Expr, table: ClassTable) -> Type:
    """Type of an expression; raises IllTyped with the failing rule."""
    if isinstance(expr, IntLit):
        return INT
    if isinstance(expr, This):
        if "this" not in ctx.gamma:
            raise IllTyped(Diagnostic(
                T_VAR, "variable-not-found: 'this' is not bound here", expr.span))
        return ctx.gamma["this"]
    if isinstance(expr, Local):
        if expr.name not in ctx.gamma:
            raise IllTyped(Diagnostic(
                T_VAR, f"variable-not-found: {expr.name!r}", expr.span))
        return ctx.gamma[expr.name]
    if isinstance(expr, ArithOp):
        for side in (expr.left, expr.right):
            if type_expr(ctx, side, table) != INT:
                raise IllTyped(Diagnostic(
                    T_ARITH,
                    f"arithmetic needs integer operands, got "
                    f"{print_expr(side)}", expr.span))
        return INT
    if isinstance(expr, Cast):
        if expr.class_name not in table.classes:
            raise IllTyped(Diagnostic(
                T_CAST_REF, f"unknown class {expr.class_name!r}", expr.span))
        operand = type_expr(ctx, expr.operand, table)
        if operand == INT:
            return INT
        source = _class_of(operand)
        if source is None:
            raise IllTyped(Diagnostic(
                T_CAST_REF,
                f"cast-error: operand has type {print_type(operand)}",
                expr.span))
        if not table.subclass_of(source, expr.class_name):
            raise IllTyped(Diagnostic(
                T_CAST_REF,
                f"cast-error: {source} is not a subclass of "
                f"{expr.class_name}; downcasts are rejected", expr.span))
        return ref_to(expr.class_name)
    if isinstance(expr, FieldRead):
        obj = type_expr(ctx, expr.obj, table)
        cls = _class_of(obj)
        if cls is None:
            raise IllTyped(Diagnostic(
                T_FIELD,
                f"field access on non-object of type {print_type(obj)}",
                expr.span))
        owner = table.class_of_var(cls, expr.field_name)
        if owner is None:
            raise IllTyped(Diagnostic(
                T_FIELD,
                f"field-not-found: class {cls} has no field "
                f"{expr.field_name!r}", expr.span))
        key = (owner, expr.field_name)
        if key not in ctx.gamma:
            raise IllTyped(Diagnostic(
                T_FIELD,
                f"field {owner}.{expr.field_name} has no checkable type",
                expr.span))
        return ctx.gamma[key]
    raise ValueError(f"unknown expression node: {expr!r}")


def type_bexpr(ctx: Context, bexpr: BExpr, table: ClassTable) -> None:
    """Well-formedness of a guard; raises IllTyped on the first failure."""
    if isinstance(bexpr, BoolLit):
        return
    if isinstance(bexpr, Compare):
        for side in (bexpr.left, bexpr.right):
            if type_expr(ctx, side, table) != INT:
                raise IllTyped(Diagnostic(
                    T_COMPARE,
                    f"comparison needs integer operands, got "
                    f"{print_expr(side)}", bexpr.span))
        return
    if isinstance(bexpr, BoolOp):
        type_bexpr(ctx, bexpr.left, table)
        type_bexpr(ctx, bexpr.right, table)
        return
    raise ValueError(f"unknown boolean node: {bexpr!r}")


@dataclass(frozen=True)
class _Sig:
    param: Type | None  # None when the declaration itself is broken
    ret: Type | None


class Checker:
    """Two-phase checker: first collect every function signature (the
    declared parameter type plus the type of the return expression),
    then check statement bodies against them."""

    def __init__(self, program: Program, table: ClassTable | None = None):
        self.program = program
        self.table = table if table is not None else build_class_table(program)
        self.ctx, decl_diags = build_context(program, self.table)
        self.diags: list[Diagnostic] = list(decl_diags)
        self.class_sigs: dict[tuple[str, str], _Sig] = {}
        self.layer_sigs: dict[tuple[str, str], _Sig] = {}
        self._collect_signatures()

    # ------------------------------------------------------ signatures

    def _fun_context(self, cls_name: str, fun: FunDecl) -> Context:
        extension: Gamma = {}
        if _valid_decl_type(fun.param_type):
            extension[fun.param] = fun.param_type
        for name, declared in fun.locals:
            if _valid_decl_type(declared):
                extension[name] = declared
        extension["this"] = ref_to(cls_name)
        return self.ctx.extend(extension)

    def _signature(self, cls_name: str, fun: FunDecl,
                   where: str) -> _Sig:
        param: Type | None = fun.param_type
        if not _valid_decl_type(fun.param_type):
            self.diags.append(Diagnostic(
                T_DECL,
                f"parameter {fun.param!r} of {where} cannot be declared "
                f"{print_type(fun.param_type)}", fun.span))
            param = None
        for name, declared in fun.locals:
            if not _valid_decl_type(declared):
                self.diags.append(Diagnostic(
                    T_DECL,
                    f"local {name!r} of {where} cannot be declared "
                    f"{print_type(declared)}", fun.span))
        ret: Type | None
        try:
            ret = type_expr(self._fun_context(cls_name, fun), fun.ret, self.table)
        except IllTyped as ill:
            self.diags.append(ill.diagnostic)
            ret = None
        return _Sig(param, ret)

    def _collect_signatures(self) -> None:
        for cls in self.program.classes:
            for fun in cls.funs:
                self.class_sigs[(cls.name, fun.name)] = self._signature(
                    cls.name, fun, f"{cls.name}.{fun.name}")
            for layer in cls.layers:
                self.layer_sigs[(cls.name, layer.name)] = self._signature(
                    cls.name, layer.fun,
                    f"{cls.name}.{layer.name}.{layer.fun.name}")

    def class_fun_type(self, cls_name: str, fun_name: str) -> FunType | None:
        sig = self.class_sigs.get((cls_name, fun_name))
        if sig is None or sig.param is None or sig.ret is None:
            return None
        return FunType(sig.param, sig.ret)

    def layer_fun_type(self, cls_name: str, layer_name: str) -> FunType | None:
        sig = self.layer_sigs.get((cls_name, layer_name))
        if sig is None or sig.param is None or sig.ret is None:
            return None
        return FunType(sig.param, sig.ret)

    def _effective_sig(self, cls_name: str, fun_name: str) -> _Sig | None:
        host = self.table.fun_hosts.get(cls_name, {}).get(fun_name)
        if host is None:
            return None
        return self.class_sigs.get((host, fun_name))

    # -------------------------------------------------- layer variants

    def _variant_sigs(self, cls_name: str, fun_name: str) -> list[tuple[str, _Sig]]:
        found = []
        for layer_name, decl in self.table.layers.get(cls_name, {}).items():
            if decl.fun.name == fun_name and layer_name in self.ctx.layers:
                found.append((layer_name, self.layer_sigs[(cls_name, layer_name)]))
        return found

    def _common_bound(self, cls_name: str, fun_name: str,
                      include_base: bool, rule: str,
                      span: Span | None) -> _Sig | None:
        """One parameter type and one return bound across the layer
        definitions of a function (optionally the class's own definition
        too).  Returns None and diagnoses when no bound exists; returns
        a signature when one does, or a fully-unknown signature when
        there are no definitions to bound."""
        sigs: list[_Sig] = []
        if include_base:
            own = self.class_sigs.get((cls_name, fun_name))
            if own is not None:
                sigs.append(own)
        sigs.extend(sig for _, sig in self._variant_sigs(cls_name, fun_name))
        params = {sig.param for sig in sigs if sig.param is not None}
        rets = {sig.ret for sig in sigs if sig.ret is not None}
        if len(params) > 1 or len(rets) > 1:
            self.diags.append(Diagnostic(
                rule,
                f"no common bound for {fun_name!r}: the definitions hosted "
                f"by the layers of {cls_name} disagree on their types", span))
            return None
        return _Sig(next(iter(params), None), next(iter(rets), None))

    # ------------------------------------------------------ statements

    def _type_of_name(self, name: str, ctx: Context,
                      rule: str, span: Span | None) -> Type | None:
        if name == "this":
            if "this" not in ctx.gamma:
                self.diags.append(Diagnostic(
                    rule, "variable-not-found: 'this' is not bound here", span))
                return None
            return ctx.gamma["this"]
        if name not in ctx.gamma:
            self.diags.append(Diagnostic(
                rule, f"variable-not-found: {name!r}", span))
            return None
        return ctx.gamma[name]

    def _receiver_class(self, name: str, ctx: Context, rule: str,
                        span: Span | None) -> str | None:
        declared = self._type_of_name(name, ctx, rule, span)
        if declared is None:
            return None
        cls = _class_of(declared)
        if cls is None:
            self.diags.append(Diagnostic(
                rule,
                f"receiver {name!r} has type {print_type(declared)}, "
                f"not a class reference", span))
        return cls

    def _expr_type(self, ctx: Context, expr: Expr) -> Type | None:
        try:
            return type_expr(ctx, expr, self.table)
        except IllTyped as ill:
            self.diags.append(ill.diagnostic)
            return None

    def _check_arg_and_target(self, ctx: Context, stmt, sig: _Sig,
                              rule: str) -> None:
        arg_type = self._expr_type(ctx, stmt.arg)
        if arg_type is not None and sig.param is not None:
            if not self.table.subtype(arg_type, sig.param):
                self.diags.append(Diagnostic(
                    rule,
                    f"argument of type {print_type(arg_type)} does not fit "
                    f"parameter type {print_type(sig.param)}", stmt.span))
        target_type = self._type_of_name(stmt.target, ctx, T_VAR, stmt.span)
        if target_type is not None and sig.ret is not None:
            if not self.table.subtype(sig.ret, target_type):
                self.diags.append(Diagnostic(
                    rule,
                    f"result of type {print_type(sig.ret)} does not fit "
                    f"target {stmt.target!r} of type {print_type(target_type)}",
                    stmt.span))

    def wf_stmt(self, ctx: Context, stmt: Stmt,
                enclosing: str | None) -> None:
        if isinstance(stmt, SeqStmt):
            self.wf_stmt(ctx, stmt.first, enclosing)
            self.wf_stmt(ctx, stmt.second, enclosing)
            return
        if isinstance(stmt, FieldAssign):
            target_type = self._expr_type(ctx, stmt.target)
            value_type = self._expr_type(ctx, stmt.value)
            if target_type is None:
                return
            cls = _class_of(target_type)
            if cls is None:
                self.diags.append(Diagnostic(
                    T_FIELD_ASSIGN,
                    f"assignment target {print_expr(stmt.target)} has type "
                    f"{print_type(target_type)}, not a class reference",
                    stmt.span))
                return
            owner = self.table.class_of_var(cls, stmt.field_name)
            if owner is None:
                self.diags.append(Diagnostic(
                    T_FIELD_ASSIGN,
                    f"field-not-found: class {cls} has no field "
                    f"{stmt.field_name!r}", stmt.span))
                return
            field_type = ctx.gamma.get((owner, stmt.field_name))
            if field_type is None or value_type is None:
                return
            if not self.table.subtype(value_type, field_type):
                self.diags.append(Diagnostic(
                    T_FIELD_ASSIGN,
                    f"cannot store {print_type(value_type)} into field "
                    f"{owner}.{stmt.field_name} of type "
                    f"{print_type(field_type)}", stmt.span))
            return
        if isinstance(stmt, Call):
            cls = self._receiver_class(stmt.receiver, ctx, T_CALL, stmt.span)
            if cls is None:
                self._expr_type(ctx, stmt.arg)
                return
            sig = self._effective_sig(cls, stmt.fun)
            if sig is None:
                self.diags.append(Diagnostic(
                    T_CALL,
                    f"procedure-not-found: class {cls} has no procedure "
                    f"{stmt.fun!r}", stmt.span))
                self._expr_type(ctx, stmt.arg)
                return
            self._check_arg_and_target(ctx, stmt, sig, T_CALL)
            return
        if isinstance(stmt, LayeredCall):
            after = apply_layer_expr(stmt.layers, tuple(sorted(ctx.layers)))
            if set(after) != set(ctx.layers):
                self.diags.append(Diagnostic(
                    T_LAYERED,
                    "layer expression must preserve the static layer set; "
                    "an uncompensated `without` is rejected", stmt.span))
            cls = self._receiver_class(stmt.receiver, ctx, T_LAYERED, stmt.span)
            if cls is None:
                self._expr_type(ctx, stmt.arg)
                return
            bound = self._common_bound(cls, stmt.fun, include_base=False,
                                       rule=T_LAYERED, span=stmt.span)
            if bound is None:
                return
            self._check_arg_and_target(ctx, stmt, bound, T_LAYERED)
            return
        if isinstance(stmt, SuperCall):
            if enclosing is None:
                self.diags.append(Diagnostic(
                    T_SUPER, "super cannot be used at the top level",
                    stmt.span))
                self._expr_type(ctx, stmt.arg)
                return
            parent = self.table.parent_of(enclosing)
            if parent is None:
                self.diags.append(Diagnostic(
                    T_SUPER, f"class {enclosing} has no superclass",
                    stmt.span))
                return
            owner = self.table.super_lookup(parent, stmt.fun)
            if owner is None:
                self.diags.append(Diagnostic(
                    T_SUPER,
                    f"procedure-not-found: no class above {enclosing} "
                    f"defines {stmt.fun!r}", stmt.span))
                return
            sig = self.class_sigs[(owner, stmt.fun)]
            self._check_arg_and_target(ctx, stmt, sig, T_SUPER)
            return
        if isinstance(stmt, ProceedCall):
            cls = self._receiver_class(stmt.receiver, ctx, T_PROCEED, stmt.span)
            if cls is None:
                self._expr_type(ctx, stmt.arg)
                return
            bound = self._common_bound(cls, stmt.fun, include_base=False,
                                       rule=T_PROCEED, span=stmt.span)
            if bound is None:
                return
            self._check_arg_and_target(ctx, stmt, bound, T_PROCEED)
            return
        if isinstance(stmt, New):
            if stmt.class_name not in self.table.classes:
                self.diags.append(Diagnostic(
                    T_NEW, f"unknown class {stmt.class_name!r}", stmt.span))
                return
            target_type = self._type_of_name(stmt.target, ctx, T_VAR, stmt.span)
            if target_type is None:
                return
            declared = _class_of(target_type)
            if declared is None:
                self.diags.append(Diagnostic(
                    T_NEW,
                    f"target {stmt.target!r} of type "
                    f"{print_type(target_type)} cannot hold an object",
                    stmt.span))
                return
            if not self.table.subclass_of(stmt.class_name, declared):
                self.diags.append(Diagnostic(
                    T_NEW,
                    f"{stmt.class_name} is not a subclass of {declared}",
                    stmt.span))
            return
        if isinstance(stmt, If):
            try:
                type_bexpr(ctx, stmt.cond, self.table)
            except IllTyped as ill:
                self.diags.append(ill.diagnostic)
            self.wf_stmt(ctx, stmt.then_branch, enclosing)
            self.wf_stmt(ctx, stmt.else_branch, enclosing)
            return
        if isinstance(stmt, While):
            try:
                type_bexpr(ctx, stmt.cond, self.table)
            except IllTyped as ill:
                self.diags.append(ill.diagnostic)
            self.wf_stmt(ctx, stmt.body, enclosing)
            return
        raise ValueError(f"unknown statement node: {stmt!r}")

    # ------------------------------------------------------- top level

    def _check_override(self, cls_name: str, fun: FunDecl) -> None:
        own = self.class_sigs[(cls_name, fun.name)]
        ancestor = self.table.parent_of(cls_name)
        while ancestor is not None:
            above = self.class_sigs.get((ancestor, fun.name))
            if above is not None:
                if (own.param is not None and above.param is not None
                        and own.param != above.param):
                    self.diags.append(Diagnostic(
                        T_CLASS_FUN,
                        f"{cls_name}.{fun.name} changes the parameter type "
                        f"of {ancestor}.{fun.name}: redefinitions must keep "
                        f"it", fun.span))
                if (own.ret is not None and above.ret is not None
                        and not self.table.subtype(own.ret, above.ret)):
                    self.diags.append(Diagnostic(
                        T_CLASS_FUN,
                        f"{cls_name}.{fun.name} returns "
                        f"{print_type(own.ret)}, which does not fit the "
                        f"{print_type(above.ret)} returned by "
                        f"{ancestor}.{fun.name}", fun.span))
            ancestor = self.table.parent_of(ancestor)

    def check(self) -> TypeReport:
        for cls in self.program.classes:
            for fun in cls.funs:
                if fun.body is not None:
                    self.wf_stmt(self._fun_context(cls.name, fun),
                                 fun.body, cls.name)
                self._check_override(cls.name, fun)
                self._common_bound(cls.name, fun.name, include_base=True,
                                   rule=T_CLASS_FUN, span=fun.span)
            for layer in cls.layers:
                if layer.fun.body is not None:
                    self.wf_stmt(self._fun_context(cls.name, layer.fun),
                                 layer.fun.body, cls.name)
        if self.program.main_body is not None:
            self.wf_stmt(self.ctx, self.program.main_body, None)
        ordered = sorted(
            enumerate(self.diags),
            key=lambda pair: (pair[1].span.line if pair[1].span else 1 << 30,
                              pair[1].span.col if pair[1].span else 0,
                              pair[0]))
        return TypeReport(tuple(diag for _, diag in ordered))


def check_program(program: Program) -> TypeReport:
    """Full check; table construction failures become diagnostics so the
    checker is total over parseable programs."""
    try:
        return Checker(program).check()
    except BuildError as err:
        return TypeReport((Diagnostic(T_TABLE, err.message, None),))
