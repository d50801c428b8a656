"""Concrete syntax coverage: accepted shapes, rejected shapes, and the
exact trees a few canonical sources must produce."""

import pytest

from jcop.parser import ParseError, parse_program, tokenize
from jcop.syntax import (
    BOOL,
    INT,
    BoolLit,
    Call,
    Cast,
    Compare,
    FieldAssign,
    FieldRead,
    IntLit,
    LayerSeq,
    LayeredCall,
    Local,
    New,
    ProceedCall,
    SuperCall,
    This,
    With,
    Without,
    ref_to,
    seq_items,
)

# the running example spelled with one declaration per field
CUBE_SEPARATE_DECLS = """\
class Cube {
  int length;
  int width;
  int height;
  modify(int p){
    this.length := 4;
    return(this.length);
  }
  layer Second_dim {
    modify(int p){
      this.width := 5;
      return(this.width);
    }
  }
  layer Third_dim {
    modify(int p){
      this.height := 6;
      return(this.height);
    }
  }
}
main(){
  Cube o;
  int r;
  o := new Cube;
  r := o.modify(0);
  r := with Second_dim o.modify(0);
}
"""


def test_cube_declaration_shape():
    prog = parse_program(CUBE_SEPARATE_DECLS)
    assert len(prog.classes) == 1
    cube = prog.classes[0]
    assert cube.name == "Cube"
    assert cube.parent is None
    assert [n for n, _ in cube.fields] == ["length", "width", "height"]
    assert all(t == INT for _, t in cube.fields)
    assert len(cube.funs) == 1
    assert cube.funs[0].name == "modify"
    assert [layer.name for layer in cube.layers] == ["Second_dim", "Third_dim"]


def test_cube_main_statements():
    prog = parse_program(CUBE_SEPARATE_DECLS)
    assert prog.main_locals == (("o", ref_to("Cube")), ("r", INT))
    stmts = seq_items(prog.main_body)
    assert stmts == [
        New("o", "Cube"),
        Call("r", "o", "modify", IntLit(0)),
        LayeredCall("r", With("Second_dim"), "o", "modify", IntLit(0)),
    ]


def test_grouped_and_separate_field_declarations_agree(cube_source):
    assert parse_program(cube_source) == parse_program(CUBE_SEPARATE_DECLS)


def test_fun_decl_parts():
    prog = parse_program(CUBE_SEPARATE_DECLS)
    fun = prog.classes[0].funs[0]
    assert fun.param == "p"
    assert fun.param_type == INT
    assert fun.locals == ()
    assert fun.ret == FieldRead(This(), "length")
    assert seq_items(fun.body) == [FieldAssign(This(), "length", IntLit(4))]


def test_comments_are_stripped():
    src = "// leading note\nmain(){\n  // inner note\n}\n"
    prog = parse_program(src)
    assert prog.classes == ()
    assert prog.main_body is None


def test_empty_fun_body_is_just_the_return():
    src = """\
class A {
  int x;
  f(int p){
    return(p);
  }
}
main(){
}
"""
    fun = parse_program(src).classes[0].funs[0]
    assert fun.body is None
    assert fun.ret == Local("p")


def test_fun_locals_precede_statements():
    src = """\
class A {
  int x;
  f(int p){
    int q;
    A other;
    q := super.f(0);
    return(q);
  }
}
main(){
}
"""
    fun = parse_program(src).classes[0].funs[0]
    assert fun.locals == (("q", INT), ("other", ref_to("A")))
    assert seq_items(fun.body) == [SuperCall("q", "f", IntLit(0))]


def test_proceed_and_super_forms():
    src = """\
class A {
  int x;
  f(int p){
    int q;
    q := super.g(1);
    q := proceed this.g(2);
    return(q);
  }
}
main(){
}
"""
    body = seq_items(parse_program(src).classes[0].funs[0].body)
    assert body == [
        SuperCall("q", "g", IntLit(1)),
        ProceedCall("q", "this", "g", IntLit(2)),
    ]


def test_layer_expression_folds_left():
    src = "main(){\n  A o;\n  int r;\n  r := with A without B with C o.f(0);\n}\n"
    stmt = seq_items(parse_program(src).main_body)[0]
    assert stmt.layers == LayerSeq(LayerSeq(With("A"), Without("B")), With("C"))


def test_bool_is_a_type_in_the_grammar():
    prog = parse_program("main(){\n  bool b;\n}\n")
    assert prog.main_locals == (("b", BOOL),)


def test_guard_grammar():
    src = """\
main(){
  A o;
  if true && 1 < 2 then {
    o := new A;
  } else {
    o := new A;
  }
}
"""
    stmt = seq_items(parse_program(src).main_body)[0]
    assert stmt.cond.op == "&&"
    assert stmt.cond.left == BoolLit(True)
    assert stmt.cond.right == Compare(IntLit(1), "<", IntLit(2))


def test_cast_binds_tighter_than_arithmetic():
    src = "main(){\n  A o;\n  o.x := (B)o + 1;\n}\n"
    stmt = seq_items(parse_program(src).main_body)[0]
    assert stmt.value.left == Cast("B", Local("o"))
    assert stmt.value.right == IntLit(1)


def test_parenthesised_cast_then_field_read():
    src = "main(){\n  A a;\n  a.x := ((B)a).y;\n}\n"
    stmt = seq_items(parse_program(src).main_body)[0]
    assert stmt.value == FieldRead(Cast("B", Local("a")), "y")


@pytest.mark.parametrize("source", [
    # a local cannot be assigned a bare expression
    "main(){\n  int r;\n  r := 5;\n}\n",
    # return is mandatory in a procedure
    "class A {\n  int x;\n  f(int p){\n    this.x := 1;\n  }\n}\nmain(){\n}\n",
    # main has no return
    "main(){\n  return(0);\n}\n",
    # branch blocks need at least one statement
    "main(){\n  A o;\n  if true then {\n  } else {\n    o := new A;\n  }\n}\n",
    # call results cannot be chained
    "main(){\n  int r;\n  A o;\n  r := o.f(0).g(1);\n}\n",
    # no unary minus
    "main(){\n  A o;\n  o.x := -1;\n}\n",
    # no division operator
    "main(){\n  A o;\n  o.x := 4 / 2;\n}\n",
    # reserved words are not names
    "main(){\n  int class;\n}\n",
    # receivers are names, not expressions
    "main(){\n  int r;\n  A o;\n  r := o.link.f(0);\n}\n",
    # a program needs a main
    "class A {\n  int x;\n}\n",
])
def test_rejected_shapes(source):
    with pytest.raises(ParseError):
        parse_program(source)


def test_parse_error_carries_position():
    try:
        parse_program("main(){\n  int r;\n  r := 5;\n}\n")
    except ParseError as err:
        assert err.line == 3
        assert err.col > 0
    else:
        raise AssertionError("expected a ParseError")


def test_tokenizer_positions():
    tokens = tokenize("main(){\n}\n")
    assert tokens[0].kind == "main"
    assert (tokens[0].line, tokens[0].col) == (1, 1)
    assert tokens[-1].kind == "eof"
