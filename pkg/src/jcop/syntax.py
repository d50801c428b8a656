"""Abstract syntax for the language.

Nodes are frozen dataclasses and compare structurally.  Source positions
(``span``) are carried for diagnostics but excluded from equality, so a
parsed tree and a regenerated tree printed from it compare equal.

Types are richer than what the concrete syntax can spell: only ``int``,
``bool`` and bare class names (meaning a reference to that class) can be
written in a declaration.  Reference and function types exist so that
judgments and lookup results have somewhere to live.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def start(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Node:
    span: Span | None = field(default=None, kw_only=True, compare=False, repr=False)


# ---------------------------------------------------------------- types


class Type(Node):
    pass


@dataclass(frozen=True)
class IntType(Type):
    pass


@dataclass(frozen=True)
class BoolType(Type):
    pass


@dataclass(frozen=True)
class ClassType(Type):
    name: str


@dataclass(frozen=True)
class RefType(Type):
    inner: Type


@dataclass(frozen=True)
class FunType(Type):
    param: Type
    result: Type


INT = IntType()
BOOL = BoolType()


def ref_to(class_name: str) -> RefType:
    """Reference type for a declared class name, as written ``C x;``."""
    return RefType(ClassType(class_name))


# ------------------------------------------------------- expressions


class Expr(Node):
    pass


@dataclass(frozen=True)
class IntLit(Expr):
    value: int  # non-negative in concrete syntax


@dataclass(frozen=True)
class Cast(Expr):
    class_name: str
    operand: Expr


@dataclass(frozen=True)
class This(Expr):
    pass


@dataclass(frozen=True)
class Local(Expr):
    name: str


@dataclass(frozen=True)
class FieldRead(Expr):
    obj: Expr
    field_name: str


@dataclass(frozen=True)
class ArithOp(Expr):
    left: Expr
    op: str  # one of + - *
    right: Expr


# --------------------------------------------------- boolean expressions


class BExpr(Node):
    pass


@dataclass(frozen=True)
class BoolLit(BExpr):
    value: bool


@dataclass(frozen=True)
class Compare(BExpr):
    left: Expr
    op: str  # one of < <= > >= == !=
    right: Expr


@dataclass(frozen=True)
class BoolOp(BExpr):
    left: BExpr
    op: str  # && or ||
    right: BExpr


# ------------------------------------------------- layer expressions


class LayerExpr(Node):
    pass


@dataclass(frozen=True)
class With(LayerExpr):
    layer: str


@dataclass(frozen=True)
class Without(LayerExpr):
    layer: str


@dataclass(frozen=True)
class EmptyLayers(LayerExpr):
    pass


@dataclass(frozen=True)
class LayerSeq(LayerExpr):
    first: LayerExpr
    second: LayerExpr


# --------------------------------------------------------- statements


class Stmt(Node):
    pass


@dataclass(frozen=True)
class FieldAssign(Stmt):
    target: Expr
    field_name: str
    value: Expr


@dataclass(frozen=True)
class Call(Stmt):
    target: str
    receiver: str  # local name, or "this"
    fun: str
    arg: Expr


@dataclass(frozen=True)
class LayeredCall(Stmt):
    target: str
    layers: LayerExpr
    receiver: str
    fun: str
    arg: Expr


@dataclass(frozen=True)
class SuperCall(Stmt):
    target: str
    fun: str
    arg: Expr


@dataclass(frozen=True)
class ProceedCall(Stmt):
    target: str
    receiver: str
    fun: str
    arg: Expr


@dataclass(frozen=True)
class New(Stmt):
    target: str
    class_name: str


@dataclass(frozen=True)
class SeqStmt(Stmt):
    first: Stmt
    second: Stmt


@dataclass(frozen=True)
class If(Stmt):
    cond: BExpr
    then_branch: Stmt
    else_branch: Stmt


@dataclass(frozen=True)
class While(Stmt):
    cond: BExpr
    body: Stmt


# ------------------------------------------------------- declarations


@dataclass(frozen=True)
class FunDecl(Node):
    name: str
    param: str
    param_type: Type
    locals: tuple[tuple[str, Type], ...]
    body: Stmt | None  # None means the body has no statement before return
    ret: Expr


@dataclass(frozen=True)
class LayerDecl(Node):
    name: str
    fun: FunDecl


@dataclass(frozen=True)
class ClassDecl(Node):
    name: str
    parent: str | None
    fields: tuple[tuple[str, Type], ...]
    funs: tuple[FunDecl, ...]
    layers: tuple[LayerDecl, ...]


@dataclass(frozen=True)
class Program(Node):
    classes: tuple[ClassDecl, ...]
    main_locals: tuple[tuple[str, Type], ...]
    main_body: Stmt | None


def seq_of(stmts: list[Stmt]) -> Stmt | None:
    """Right-fold a statement list into the binary sequencing form."""
    if not stmts:
        return None
    result = stmts[-1]
    for s in reversed(stmts[:-1]):
        result = SeqStmt(s, result, span=s.span)
    return result


def seq_items(stmt: Stmt | None) -> list[Stmt]:
    """Flatten the right-nested sequencing spine back into a list."""
    items: list[Stmt] = []
    cur = stmt
    while isinstance(cur, SeqStmt):
        items.append(cur.first)
        cur = cur.second
    if cur is not None:
        items.append(cur)
    return items
