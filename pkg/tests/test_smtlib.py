from __future__ import annotations

import pytest
from hypothesis import given

from precision_reuse.formula import Atom, LinExpr, compare, conj, neg
from precision_reuse.smtlib import SmtError, parse_sexprs, parse_smt_subset, render_atom, render_smt_subset

from strategies import atoms_st

x, lock = LinExpr.var("x"), LinExpr.var("lock")


def test_sexpr_parsing():
    assert parse_sexprs("(a (b |c d|) 1) ; note\n(e)") == [["a", ["b", "|c d|"], "1"], ["e"]]
    with pytest.raises(SmtError):
        parse_sexprs("(a (b)")
    with pytest.raises(SmtError):
        parse_sexprs("a))")


def test_figure_header():
    defs = parse_smt_subset(
        "(declare-fun |lock|() Real)\n(declare-fun |x|() Real)\n"
        "(define-fun t1() Bool (= |lock| 0))\n(define-fun t2() Bool (<= |x| 1))"
    )
    assert defs.declarations == {"lock": "Real", "x": "Real"}
    assert defs.definitions == {"t1": compare(lock, "==", 0), "t2": compare(x, "<=", 1)}


def test_terms_and_connectives():
    defs = parse_smt_subset(
        "(declare-fun x () Int)(declare-fun y () Int)"
        "(assert (and (< (+ x (* 2 y)) 3) (not (= x (- 1))) (distinct y 0)))"
    )
    y = LinExpr.var("y")
    assert defs.assertions == [conj(compare(x + y.scale(2), "<", 3), neg(compare(x, "==", -1)), compare(y, "!=", 0))]


def test_errors():
    with pytest.raises(SmtError):
        parse_smt_subset("(assert (<= |q| 1))")  # undeclared
    with pytest.raises(SmtError):
        parse_smt_subset("(declare-fun b () Bool)")
    with pytest.raises(SmtError):
        parse_smt_subset("(declare-fun x () Int)(assert (<= x 1.5))")
    with pytest.raises(SmtError):
        parse_smt_subset("(check-sat)")


def test_integral_decimals_accepted():
    defs = parse_smt_subset("(declare-fun x () Real)(assert (<= x 1.0))")
    assert defs.assertions == [compare(x, "<=", 1)]


def test_render_header():
    text = render_smt_subset(["x"], {"t1": compare(x, "<=", 1)})
    assert text == "(declare-fun |x|() Int)\n(define-fun t1() Bool (<= |x| 1))"


@given(atoms_st())
def test_render_parse_round_trip(a):
    if not isinstance(a, Atom):
        return
    decls = "".join(f"(declare-fun |{v}|() Int)" for v in sorted(a.variables))
    defs = parse_smt_subset(decls + f"(assert {render_atom(a)})")
    assert defs.assertions == [a]
