"""Class table: declaration indexing, subtyping, and the lookup rules.

The table keeps two views of members.  The *direct* maps hold only what a
class itself declares and drive the nearest-declarer walks (`class_of_var`,
`super_lookup`).  The *effective* maps merge each class with its ancestors,
nearer declarations shadowing farther ones, and drive dynamic dispatch.

Layer activation (`apply_layer_expr`) edits an ordered, duplicate-free
list of layer names whose head is the most recently activated layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    BoolType,
    ClassDecl,
    ClassType,
    EmptyLayers,
    FunDecl,
    FunType,
    IntType,
    LayerDecl,
    LayeredCall,
    LayerExpr,
    LayerSeq,
    Program,
    RefType,
    Stmt,
    Type,
    With,
    Without,
    seq_items,
)
from .syntax import If, While

ActiveLayers = tuple[str, ...]


class BuildError(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


def apply_layer_expr(layer_expr: LayerExpr, active: ActiveLayers) -> ActiveLayers:
    """Evaluate a layer expression against an active-layer list.

    `with l` prepends l unless already active; `without l` removes it;
    the empty expression leaves the list alone; a sequence applies its
    parts left to right.
    """
    if isinstance(layer_expr, EmptyLayers):
        return active
    if isinstance(layer_expr, With):
        if layer_expr.layer in active:
            return active
        return (layer_expr.layer,) + active
    if isinstance(layer_expr, Without):
        return tuple(name for name in active if name != layer_expr.layer)
    if isinstance(layer_expr, LayerSeq):
        return apply_layer_expr(layer_expr.second,
                                apply_layer_expr(layer_expr.first, active))
    raise ValueError(f"unknown layer expression: {layer_expr!r}")


@dataclass
class ClassTable:
    classes: dict[str, ClassDecl]
    order: list[str]
    parents: dict[str, str | None]
    fields_direct: dict[str, dict[str, Type]]
    fields_all: dict[str, dict[str, Type]]  # ancestors first, then own
    funs_direct: dict[str, dict[str, FunDecl]]
    funs_all: dict[str, dict[str, FunDecl]]  # nearest declaration wins
    fun_hosts: dict[str, dict[str, str]]  # fun name -> class that supplies it
    layers: dict[str, dict[str, LayerDecl]]  # per class, declaration order
    layer_names: set[str] = field(default_factory=set)

    # ------------------------------------------------------ subtyping

    def parent_of(self, class_name: str) -> str | None:
        return self.parents.get(class_name)

    def ancestry(self, class_name: str) -> list[str]:
        """The chain from the class itself up to the root, in order."""
        chain = []
        cur: str | None = class_name
        while cur is not None:
            chain.append(cur)
            cur = self.parents.get(cur)
        return chain

    def subclass_of(self, sub: str, sup: str) -> bool:
        return sup in self.ancestry(sub) if sub in self.classes else sub == sup

    def subtype(self, a: Type, b: Type) -> bool:
        """Class names relate along inheritance; every other type only
        to itself."""
        if isinstance(a, ClassType) and isinstance(b, ClassType):
            return self.subclass_of(a.name, b.name)
        if isinstance(a, IntType) and isinstance(b, IntType):
            return True
        if isinstance(a, BoolType) and isinstance(b, BoolType):
            return True
        if isinstance(a, RefType) and isinstance(b, RefType):
            return a == b
        if isinstance(a, FunType) and isinstance(b, FunType):
            return a == b
        return False

    # ----------------------------------------------------- lookup rules

    def class_of_var(self, class_name: str, var: str) -> str | None:
        """Nearest class on the chain that itself declares the field,
        or None when no class on the chain does."""
        for cls in self.ancestry(class_name):
            if var in self.fields_direct.get(cls, {}):
                return cls
        return None

    def super_lookup(self, class_name: str, fun: str) -> str | None:
        """Nearest class at or above `class_name` that itself defines
        the function, or None."""
        for cls in self.ancestry(class_name):
            if fun in self.funs_direct.get(cls, {}):
                return cls
        return None

    def lyrfun(self, class_name: str, fun: str, layer: str,
               acc: ActiveLayers) -> ActiveLayers:
        """Append the layer to the accumulator iff the class hosts a
        definition of `fun` inside that layer; otherwise keep it."""
        decl = self.layers.get(class_name, {}).get(layer)
        if decl is not None and decl.fun.name == fun:
            return acc + (layer,)
        return acc

    def clslyrs(self, class_name: str, fun: str,
                active: ActiveLayers) -> ActiveLayers:
        """Layers of the class that define `fun` and are active, in the
        class's declaration order (the left operand of the intersection
        decides the order)."""
        acc: ActiveLayers = ()
        for layer in self.layers.get(class_name, {}):
            acc = self.lyrfun(class_name, fun, layer, acc)
        return tuple(name for name in acc if name in active)

    def layer_fun(self, class_name: str, layer: str) -> FunDecl | None:
        decl = self.layers.get(class_name, {}).get(layer)
        return decl.fun if decl is not None else None


def _declared_type_names(t: Type) -> list[str]:
    if isinstance(t, ClassType):
        return [t.name]
    if isinstance(t, RefType):
        return _declared_type_names(t.inner)
    if isinstance(t, FunType):
        return _declared_type_names(t.param) + _declared_type_names(t.result)
    return []


def _walk_stmts(stmt: Stmt | None):
    for item in seq_items(stmt):
        yield item
        if isinstance(item, If):
            yield from _walk_stmts(item.then_branch)
            yield from _walk_stmts(item.else_branch)
        elif isinstance(item, While):
            yield from _walk_stmts(item.body)


def _layer_expr_names(layer_expr: LayerExpr) -> list[str]:
    if isinstance(layer_expr, (With, Without)):
        return [layer_expr.layer]
    if isinstance(layer_expr, LayerSeq):
        return (_layer_expr_names(layer_expr.first)
                + _layer_expr_names(layer_expr.second))
    return []


def _all_fun_decls(program: Program):
    for cls in program.classes:
        for fun in cls.funs:
            yield fun
        for layer in cls.layers:
            yield layer.fun


def build_class_table(program: Program) -> ClassTable:
    """Index a program's declarations.

    Raises BuildError on: duplicate class names, unknown or cyclic
    parents, duplicate member names within a class, a field shadowing an
    ancestor's field, an unknown class name in a declared type, or an
    unknown layer name mentioned by a layer expression.
    """
    classes: dict[str, ClassDecl] = {}
    for cls in program.classes:
        if cls.name in classes:
            raise BuildError(f"duplicate class name {cls.name!r}")
        classes[cls.name] = cls

    parents: dict[str, str | None] = {}
    for cls in program.classes:
        if cls.parent is not None and cls.parent not in classes:
            raise BuildError(
                f"class {cls.name!r} inherits unknown class {cls.parent!r}")
        parents[cls.name] = cls.parent

    for cls in program.classes:
        seen = {cls.name}
        cur = parents[cls.name]
        while cur is not None:
            if cur in seen:
                raise BuildError(f"inheritance cycle through {cls.name!r}")
            seen.add(cur)
            cur = parents[cur]

    table = ClassTable(classes=classes, order=[c.name for c in program.classes],
                       parents=parents, fields_direct={}, fields_all={},
                       funs_direct={}, funs_all={}, fun_hosts={}, layers={})

    for cls in program.classes:
        fields: dict[str, Type] = {}
        for name, declared in cls.fields:
            if name in fields:
                raise BuildError(
                    f"duplicate field {name!r} in class {cls.name!r}")
            fields[name] = declared
        funs: dict[str, FunDecl] = {}
        for fun in cls.funs:
            if fun.name in funs:
                raise BuildError(
                    f"duplicate function {fun.name!r} in class {cls.name!r}")
            funs[fun.name] = fun
        layer_decls: dict[str, LayerDecl] = {}
        for layer in cls.layers:
            if layer.name in layer_decls:
                raise BuildError(
                    f"duplicate layer {layer.name!r} in class {cls.name!r}")
            layer_decls[layer.name] = layer
            table.layer_names.add(layer.name)
        table.fields_direct[cls.name] = fields
        table.funs_direct[cls.name] = funs
        table.layers[cls.name] = layer_decls

    # Effective views, root first so nearer declarations override.
    for cls in program.classes:
        chain = list(reversed(table.ancestry(cls.name)))
        merged_fields: dict[str, Type] = {}
        merged_funs: dict[str, FunDecl] = {}
        hosts: dict[str, str] = {}
        for link in chain:
            for name, declared in table.fields_direct[link].items():
                merged_fields[name] = declared
            for name, fun in table.funs_direct[link].items():
                merged_funs[name] = fun
                hosts[name] = link
        table.fields_all[cls.name] = merged_fields
        table.funs_all[cls.name] = merged_funs
        table.fun_hosts[cls.name] = hosts

    # Field shadowing along a chain is an error, not an override.
    for cls in program.classes:
        parent = parents[cls.name]
        if parent is None:
            continue
        for name in table.fields_direct[cls.name]:
            owner = table.class_of_var(parent, name)
            if owner is not None:
                raise BuildError(
                    f"field {name!r} in class {cls.name!r} shadows "
                    f"{owner!r}.{name}")

    # Every class name mentioned in a declared type must exist.
    def check_type(declared: Type, where: str) -> None:
        for name in _declared_type_names(declared):
            if name not in classes:
                raise BuildError(f"unknown class {name!r} in {where}")

    for cls in program.classes:
        for name, declared in cls.fields:
            check_type(declared, f"field {cls.name}.{name}")
        for fun in list(cls.funs) + [l.fun for l in cls.layers]:
            check_type(fun.param_type, f"parameter of {cls.name}.{fun.name}")
            for lname, ltype in fun.locals:
                check_type(ltype, f"local {lname!r} of {cls.name}.{fun.name}")
    for lname, ltype in program.main_locals:
        check_type(ltype, f"local {lname!r} of main")

    # Layer expressions may only mention declared layer names.
    bodies = [fun.body for fun in _all_fun_decls(program)]
    bodies.append(program.main_body)
    for body in bodies:
        for stmt in _walk_stmts(body):
            if isinstance(stmt, LayeredCall):
                for name in _layer_expr_names(stmt.layers):
                    if name not in table.layer_names:
                        raise BuildError(f"unknown layer {name!r}")

    return table
