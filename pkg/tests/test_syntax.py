"""Tree construction and the equality contract the other modules rely on."""

from jcop.syntax import (
    INT,
    ClassType,
    IntLit,
    New,
    RefType,
    SeqStmt,
    Span,
    ref_to,
    seq_items,
    seq_of,
)


def test_spans_do_not_affect_equality():
    assert IntLit(3, span=Span(1, 1, 1, 2)) == IntLit(3)


def test_different_values_stay_unequal():
    assert IntLit(3) != IntLit(4)


def test_seq_of_right_folds():
    s1, s2, s3 = New("a", "A"), New("b", "A"), New("c", "A")
    assert seq_of([s1, s2, s3]) == SeqStmt(s1, SeqStmt(s2, s3))


def test_seq_of_single_statement_is_that_statement():
    s = New("a", "A")
    assert seq_of([s]) is s


def test_seq_of_empty_is_none():
    assert seq_of([]) is None


def test_seq_items_inverts_seq_of():
    stmts = [New(f"x{i}", "A") for i in range(4)]
    assert seq_items(seq_of(stmts)) == stmts


def test_seq_items_of_none_is_empty():
    assert seq_items(None) == []


def test_ref_to_wraps_a_class_name():
    assert ref_to("Cube") == RefType(ClassType("Cube"))
    assert ref_to("Cube") != INT
