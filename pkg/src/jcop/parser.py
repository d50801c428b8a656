"""Lexer and recursive-descent parser for the concrete syntax.

Grammar outline (Java-flavoured, `:=` assignment, `//` comments):

    program  := class* 'main' '(' ')' '{' decl* stmt* '}'
    class    := 'class' NAME ['inherits' NAME] '{' fdecl* fun* layer* '}'
    fdecl    := type NAME (',' NAME)* ';'
    fun      := NAME '(' type NAME ')' '{' decl* stmt* 'return' '(' expr ')' ';' '}'
    layer    := 'layer' NAME '{' fun '}'
    decl     := type NAME (',' NAME)* ';'
    type     := 'int' | 'bool' | NAME
    stmt     := 'if' bexpr 'then' block 'else' block
              | 'while' bexpr 'do' block
              | NAME ':=' rhs
              | expr '.' NAME ':=' expr ';'
    rhs      := 'new' NAME ';'
              | 'super' '.' NAME '(' expr ')' ';'
              | 'proceed' recv '.' NAME '(' expr ')' ';'
              | lexpr recv '.' NAME '(' expr ')' ';'
              | recv '.' NAME '(' expr ')' ';'
    recv     := NAME | 'this'
    lexpr    := (('with'|'without') NAME)+
    block    := '{' stmt+ '}'
    bexpr    := band ('||' band)* ;  band := batom ('&&' batom)*
    batom    := 'true' | 'false' | '(' bexpr ')' | expr cop expr
    expr     := mul (('+'|'-') mul)* ;  mul := castx ('*' castx)*
    castx    := '(' NAME ')' castx | postfix
    postfix  := primary ('.' NAME)*
    primary  := NUM | 'this' | NAME | '(' expr ')'

A parenthesised name is read as a cast only when the next token can start
an operand; otherwise it is a grouped expression.  Receivers must be local
names (or `this`); assignment targets must be plain local names.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    INT,
    BOOL,
    ArithOp,
    BExpr,
    BoolLit,
    BoolOp,
    Call,
    Cast,
    ClassDecl,
    Compare,
    EmptyLayers,
    Expr,
    FieldAssign,
    FieldRead,
    FunDecl,
    If,
    IntLit,
    LayerDecl,
    LayeredCall,
    LayerExpr,
    LayerSeq,
    Local,
    New,
    ProceedCall,
    Program,
    Span,
    Stmt,
    SuperCall,
    This,
    Type,
    While,
    With,
    Without,
    ref_to,
    seq_of,
)

RESERVED = {
    "class", "inherits", "layer", "with", "without", "super", "proceed",
    "new", "if", "then", "else", "while", "do", "return", "this", "main",
    "int", "bool", "true", "false",
}

_SYMBOLS = [
    ":=", "<=", ">=", "==", "!=", "&&", "||",
    "{", "}", "(", ")", ";", ",", ".", "+", "-", "*", "<", ">",
]

_CMP_OPS = {"<", "<=", ">", ">=", "==", "!="}


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int,
                 expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        where = f"{line}:{col}: {message}"
        if expected:
            where += " (expected " + " or ".join(expected) + ")"
        super().__init__(where)


@dataclass(frozen=True)
class Token:
    kind: str  # "name", "num", "eof", a keyword, or a symbol
    text: str
    line: int
    col: int

    @property
    def end_col(self) -> int:
        return self.col + max(len(self.text), 1)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("num", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = word if word in RESERVED else "name"
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                col += len(sym)
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # ------------------------------------------------------- plumbing

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            label = what or f"'{kind}'"
            raise ParseError(
                f"found {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
                tok.line, tok.col, expected=(label,))
        return self.advance()

    def fail(self, message: str, expected: tuple[str, ...] = ()) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col, expected=expected)

    def span_from(self, start: Token) -> Span:
        prev = self.tokens[max(self.pos - 1, 0)]
        return Span(start.line, start.col, prev.line, prev.end_col)

    # ---------------------------------------------------------- types

    def parse_type(self) -> Type:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return INT
        if tok.kind == "bool":
            self.advance()
            return BOOL
        if tok.kind == "name":
            self.advance()
            return ref_to(tok.text)
        raise self.fail("not a type", expected=("int", "bool", "a class name"))

    def at_type(self) -> bool:
        return self.at("int", "bool") or (
            self.peek().kind == "name" and self.peek(1).kind == "name")

    def parse_decl_group(self) -> list[tuple[str, Type]]:
        declared = self.parse_type()
        names = [self.expect("name", "a variable name").text]
        while self.at(","):
            self.advance()
            names.append(self.expect("name", "a variable name").text)
        self.expect(";")
        return [(name, declared) for name in names]

    # ----------------------------------------------- arithmetic exprs

    def parse_expr(self) -> Expr:
        start = self.peek()
        node = self.parse_mul()
        while self.at("+", "-"):
            op = self.advance().text
            right = self.parse_mul()
            node = ArithOp(node, op, right, span=self.span_from(start))
        return node

    def parse_mul(self) -> Expr:
        start = self.peek()
        node = self.parse_cast()
        while self.at("*"):
            self.advance()
            right = self.parse_cast()
            node = ArithOp(node, "*", right, span=self.span_from(start))
        return node

    def parse_cast(self) -> Expr:
        start = self.peek()
        if (start.kind == "(" and self.peek(1).kind == "name"
                and self.peek(2).kind == ")"
                and self.peek(3).kind in ("num", "name", "this", "(")):
            self.advance()
            cls = self.advance().text
            self.advance()
            operand = self.parse_cast()
            return Cast(cls, operand, span=self.span_from(start))
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        start = self.peek()
        node = self.parse_primary()
        while self.at(".") :
            self.advance()
            name = self.expect("name", "a field name").text
            node = FieldRead(node, name, span=self.span_from(start))
        return node

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return IntLit(int(tok.text), span=self.span_from(tok))
        if tok.kind == "this":
            self.advance()
            return This(span=self.span_from(tok))
        if tok.kind == "name":
            self.advance()
            return Local(tok.text, span=self.span_from(tok))
        if tok.kind == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        raise self.fail("not an expression",
                        expected=("a number", "a name", "this", "'('"))

    # ------------------------------------------------- boolean exprs

    def parse_bexpr(self) -> BExpr:
        start = self.peek()
        node = self.parse_band()
        while self.at("||"):
            self.advance()
            right = self.parse_band()
            node = BoolOp(node, "||", right, span=self.span_from(start))
        return node

    def parse_band(self) -> BExpr:
        start = self.peek()
        node = self.parse_batom()
        while self.at("&&"):
            self.advance()
            right = self.parse_batom()
            node = BoolOp(node, "&&", right, span=self.span_from(start))
        return node

    def parse_batom(self) -> BExpr:
        tok = self.peek()
        if tok.kind == "true":
            self.advance()
            return BoolLit(True, span=self.span_from(tok))
        if tok.kind == "false":
            self.advance()
            return BoolLit(False, span=self.span_from(tok))
        if tok.kind == "(":
            # Either a parenthesised boolean or the left operand of a
            # comparison; try the boolean reading first and back off.
            saved = self.pos
            try:
                self.advance()
                inner = self.parse_bexpr()
                self.expect(")")
                return inner
            except ParseError:
                self.pos = saved
        left = self.parse_expr()
        if self.peek().kind not in _CMP_OPS:
            raise self.fail("not a boolean expression",
                            expected=tuple(sorted(_CMP_OPS)))
        op = self.advance().text
        right = self.parse_expr()
        return Compare(left, op, right, span=self.span_from(tok))

    # ------------------------------------------------ layer exprs

    def parse_layer_expr(self) -> LayerExpr:
        atoms: list[LayerExpr] = []
        while self.at("with", "without"):
            tok = self.advance()
            name = self.expect("name", "a layer name").text
            atom: LayerExpr
            if tok.kind == "with":
                atom = With(name, span=self.span_from(tok))
            else:
                atom = Without(name, span=self.span_from(tok))
            atoms.append(atom)
        node = atoms[-1]
        for a in reversed(atoms[:-1]):
            node = LayerSeq(a, node, span=a.span)
        return node

    # ------------------------------------------------------ statements

    def parse_block(self) -> Stmt:
        self.expect("{")
        stmts = [self.parse_stmt()]
        while not self.at("}"):
            stmts.append(self.parse_stmt())
        self.expect("}")
        folded = seq_of(stmts)
        assert folded is not None
        return folded

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.kind == "if":
            self.advance()
            cond = self.parse_bexpr()
            self.expect("then")
            then_branch = self.parse_block()
            self.expect("else")
            else_branch = self.parse_block()
            return If(cond, then_branch, else_branch, span=self.span_from(tok))
        if tok.kind == "while":
            self.advance()
            cond = self.parse_bexpr()
            self.expect("do")
            body = self.parse_block()
            return While(cond, body, span=self.span_from(tok))
        if tok.kind == "name" and self.peek(1).kind == ":=":
            target = self.advance().text
            self.advance()
            return self.parse_assign_rhs(target, tok)
        # Anything else must be a field update `e.v := e'`.
        expr = self.parse_expr()
        if not isinstance(expr, FieldRead):
            if self.at(":="):
                raise ParseError("assignment target must be a local name or a field",
                                 tok.line, tok.col)
            raise self.fail("not a statement",
                            expected=("if", "while", "an assignment"))
        self.expect(":=")
        value = self.parse_expr()
        self.expect(";")
        return FieldAssign(expr.obj, expr.field_name, value,
                           span=self.span_from(tok))

    def parse_receiver(self) -> str:
        tok = self.peek()
        if tok.kind == "this":
            self.advance()
            return "this"
        if tok.kind == "name":
            self.advance()
            return tok.text
        raise ParseError("receiver must be a local name", tok.line, tok.col,
                         expected=("a local name", "this"))

    def parse_call_tail(self, receiver: str) -> tuple[str, Expr]:
        self.expect(".")
        fun = self.expect("name", "a function name").text
        self.expect("(")
        arg = self.parse_expr()
        self.expect(")")
        self.expect(";")
        return fun, arg

    def parse_assign_rhs(self, target: str, start: Token) -> Stmt:
        tok = self.peek()
        if tok.kind == "new":
            self.advance()
            cls = self.expect("name", "a class name").text
            self.expect(";")
            return New(target, cls, span=self.span_from(start))
        if tok.kind == "super":
            self.advance()
            fun, arg = self.parse_call_tail("this")
            return SuperCall(target, fun, arg, span=self.span_from(start))
        if tok.kind == "proceed":
            self.advance()
            receiver = self.parse_receiver()
            fun, arg = self.parse_call_tail(receiver)
            return ProceedCall(target, receiver, fun, arg,
                               span=self.span_from(start))
        if tok.kind in ("with", "without"):
            layers = self.parse_layer_expr()
            receiver = self.parse_receiver()
            fun, arg = self.parse_call_tail(receiver)
            return LayeredCall(target, layers, receiver, fun, arg,
                               span=self.span_from(start))
        if tok.kind in ("name", "this"):
            receiver = self.parse_receiver()
            fun, arg = self.parse_call_tail(receiver)
            return Call(target, receiver, fun, arg, span=self.span_from(start))
        raise ParseError("receiver must be a local name", tok.line, tok.col,
                         expected=("new", "super", "proceed", "with",
                                   "without", "a local name"))

    # ---------------------------------------------------- declarations

    def parse_fun(self) -> FunDecl:
        start = self.expect("name", "a function name")
        self.expect("(")
        param_type = self.parse_type()
        param = self.expect("name", "a parameter name").text
        self.expect(")")
        self.expect("{")
        local_decls: list[tuple[str, Type]] = []
        while self.at_type():
            local_decls.extend(self.parse_decl_group())
        stmts: list[Stmt] = []
        while not self.at("return"):
            if self.at("}", "eof"):
                raise self.fail("function body must end with return",
                                expected=("return",))
            stmts.append(self.parse_stmt())
        self.expect("return")
        self.expect("(")
        ret = self.parse_expr()
        self.expect(")")
        self.expect(";")
        self.expect("}")
        return FunDecl(start.text, param, param_type, tuple(local_decls),
                       seq_of(stmts), ret, span=self.span_from(start))

    def parse_layer(self) -> LayerDecl:
        start = self.expect("layer")
        name = self.expect("name", "a layer name").text
        self.expect("{")
        fun = self.parse_fun()
        self.expect("}")
        return LayerDecl(name, fun, span=self.span_from(start))

    def parse_class(self) -> ClassDecl:
        start = self.expect("class")
        name = self.expect("name", "a class name").text
        parent: str | None = None
        if self.at("inherits"):
            self.advance()
            parent = self.expect("name", "a class name").text
        self.expect("{")
        fields: list[tuple[str, Type]] = []
        while self.at_type() or self.at("int", "bool"):
            fields.extend(self.parse_decl_group())
        funs: list[FunDecl] = []
        while self.peek().kind == "name" and self.peek(1).kind == "(":
            funs.append(self.parse_fun())
        layers: list[LayerDecl] = []
        while self.at("layer"):
            layers.append(self.parse_layer())
        self.expect("}")
        return ClassDecl(name, parent, tuple(fields), tuple(funs),
                         tuple(layers), span=self.span_from(start))

    def parse_program(self) -> Program:
        classes: list[ClassDecl] = []
        while self.at("class"):
            classes.append(self.parse_class())
        start = self.expect("main")
        self.expect("(")
        self.expect(")")
        self.expect("{")
        main_locals: list[tuple[str, Type]] = []
        while self.at_type():
            main_locals.extend(self.parse_decl_group())
        stmts: list[Stmt] = []
        while not self.at("}"):
            stmts.append(self.parse_stmt())
        self.expect("}")
        self.expect("eof", "end of input")
        return Program(tuple(classes), tuple(main_locals), seq_of(stmts),
                       span=self.span_from(start))


def parse_program(source: str) -> Program:
    """Parse a whole program; raises ParseError with position and hints."""
    return _Parser(tokenize(source)).parse_program()


def parse_stmt(source: str) -> Stmt:
    """Parse a single statement (testing convenience)."""
    parser = _Parser(tokenize(source))
    stmt = parser.parse_stmt()
    parser.expect("eof", "end of input")
    return stmt


def parse_expr(source: str) -> Expr:
    """Parse a single arithmetic-or-object expression (testing convenience)."""
    parser = _Parser(tokenize(source))
    expr = parser.parse_expr()
    parser.expect("eof", "end of input")
    return expr
