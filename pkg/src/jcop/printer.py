"""Pretty-printer producing concrete syntax that reparses to an equal tree.

Parentheses are emitted only where precedence demands them, matching the
parser's grammar, so printing then parsing is the identity on structure.
"""

from __future__ import annotations

from .syntax import (
    ArithOp,
    BExpr,
    BoolLit,
    BoolOp,
    Call,
    Cast,
    ClassDecl,
    ClassType,
    Compare,
    EmptyLayers,
    Expr,
    FieldAssign,
    FieldRead,
    FunDecl,
    If,
    IntLit,
    IntType,
    BoolType,
    LayerDecl,
    LayeredCall,
    LayerExpr,
    LayerSeq,
    Local,
    New,
    ProceedCall,
    Program,
    SeqStmt,
    Stmt,
    SuperCall,
    This,
    Type,
    While,
    With,
    Without,
    seq_items,
)

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_CAST = 3
_PREC_POSTFIX = 4


def print_type(t: Type) -> str:
    if isinstance(t, IntType):
        return "int"
    if isinstance(t, BoolType):
        return "bool"
    if isinstance(t, ClassType):
        return t.name
    if hasattr(t, "inner") and isinstance(t.inner, ClassType):  # RefType
        return t.inner.name
    raise ValueError(f"type has no concrete syntax: {t!r}")


def print_expr(e: Expr, min_prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, This):
        return "this"
    if isinstance(e, Local):
        return e.name
    if isinstance(e, FieldRead):
        return f"{print_expr(e.obj, _PREC_POSTFIX)}.{e.field_name}"
    if isinstance(e, Cast):
        text = f"({e.class_name}){print_expr(e.operand, _PREC_CAST)}"
        return f"({text})" if _PREC_CAST < min_prec else text
    if isinstance(e, ArithOp):
        prec = _PREC_MUL if e.op == "*" else _PREC_ADD
        left = print_expr(e.left, prec)
        right = print_expr(e.right, prec + 1)
        text = f"{left} {e.op} {right}"
        return f"({text})" if prec < min_prec else text
    raise ValueError(f"unknown expression node: {e!r}")


def print_bexpr(b: BExpr, min_prec: int = 0) -> str:
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Compare):
        return f"{print_expr(b.left)} {b.op} {print_expr(b.right)}"
    if isinstance(b, BoolOp):
        prec = 2 if b.op == "&&" else 1
        left = print_bexpr(b.left, prec)
        right = print_bexpr(b.right, prec + 1)
        text = f"{left} {b.op} {right}"
        return f"({text})" if prec < min_prec else text
    raise ValueError(f"unknown boolean node: {b!r}")


def print_layer_expr(le: LayerExpr) -> str:
    if isinstance(le, With):
        return f"with {le.layer}"
    if isinstance(le, Without):
        return f"without {le.layer}"
    if isinstance(le, EmptyLayers):
        return ""
    if isinstance(le, LayerSeq):
        parts = [print_layer_expr(le.first), print_layer_expr(le.second)]
        return " ".join(p for p in parts if p)
    raise ValueError(f"unknown layer expression: {le!r}")


def _print_stmt(s: Stmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(s, SeqStmt):
        for item in seq_items(s):
            _print_stmt(item, indent, out)
        return
    if isinstance(s, FieldAssign):
        tgt = print_expr(s.target, _PREC_POSTFIX)
        out.append(f"{pad}{tgt}.{s.field_name} := {print_expr(s.value)};")
        return
    if isinstance(s, Call):
        out.append(f"{pad}{s.target} := {s.receiver}.{s.fun}({print_expr(s.arg)});")
        return
    if isinstance(s, LayeredCall):
        le = print_layer_expr(s.layers)
        le = le + " " if le else ""
        out.append(f"{pad}{s.target} := {le}{s.receiver}.{s.fun}({print_expr(s.arg)});")
        return
    if isinstance(s, SuperCall):
        out.append(f"{pad}{s.target} := super.{s.fun}({print_expr(s.arg)});")
        return
    if isinstance(s, ProceedCall):
        out.append(f"{pad}{s.target} := proceed {s.receiver}.{s.fun}({print_expr(s.arg)});")
        return
    if isinstance(s, New):
        out.append(f"{pad}{s.target} := new {s.class_name};")
        return
    if isinstance(s, If):
        out.append(f"{pad}if {print_bexpr(s.cond)} then {{")
        _print_stmt(s.then_branch, indent + 1, out)
        out.append(f"{pad}}} else {{")
        _print_stmt(s.else_branch, indent + 1, out)
        out.append(pad + "}")
        return
    if isinstance(s, While):
        out.append(f"{pad}while {print_bexpr(s.cond)} do {{")
        _print_stmt(s.body, indent + 1, out)
        out.append(pad + "}")
        return
    raise ValueError(f"unknown statement node: {s!r}")


def _print_decls(decls: tuple[tuple[str, Type], ...], indent: int,
                 out: list[str]) -> None:
    # Adjacent declarations of one type regroup onto one comma line.
    pad = "  " * indent
    i = 0
    while i < len(decls):
        j = i
        while j < len(decls) and decls[j][1] == decls[i][1]:
            j += 1
        names = ", ".join(name for name, _ in decls[i:j])
        out.append(f"{pad}{print_type(decls[i][1])} {names};")
        i = j


def _print_fun(fun: FunDecl, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    out.append(f"{pad}{fun.name}({print_type(fun.param_type)} {fun.param}){{")
    _print_decls(fun.locals, indent + 1, out)
    if fun.body is not None:
        _print_stmt(fun.body, indent + 1, out)
    out.append(f"{'  ' * (indent + 1)}return({print_expr(fun.ret)});")
    out.append(pad + "}")


def _print_class(cls: ClassDecl, out: list[str]) -> None:
    head = f"class {cls.name}"
    if cls.parent is not None:
        head += f" inherits {cls.parent}"
    out.append(head + " {")
    _print_decls(cls.fields, 1, out)
    for fun in cls.funs:
        _print_fun(fun, 1, out)
    for layer in cls.layers:
        out.append(f"  layer {layer.name} {{")
        _print_fun(layer.fun, 2, out)
        out.append("  }")
    out.append("}")


def pretty_print(program: Program) -> str:
    out: list[str] = []
    for cls in program.classes:
        _print_class(cls, out)
    out.append("main(){")
    _print_decls(program.main_locals, 1, out)
    if program.main_body is not None:
        _print_stmt(program.main_body, 1, out)
    out.append("}")
    return "\n".join(out) + "\n"
