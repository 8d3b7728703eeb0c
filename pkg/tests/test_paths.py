from __future__ import annotations

from precision_reuse.cfa import AssignOp, AssumeOp, CfaEdge, HavocOp
from precision_reuse.formula import FALSE, TRUE, LinExpr, atoms, compare, conj
from precision_reuse.paths import base_name, is_fresh, path_formula, ssa_name, weakest_precondition, wp_chain
from precision_reuse.solver import check_sat, entails

x, y = LinExpr.var("x"), LinExpr.var("y")


def edges(*ops):
    return [CfaEdge(i + 1, i + 2, op) for i, op in enumerate(ops)]


def test_ssa_names():
    assert ssa_name("x", 0) == "x"
    assert ssa_name("x", 2) == "x#2"
    assert base_name("x#2") == "x" and base_name("x!4") == "x"
    assert is_fresh("x!4") and not is_fresh("x#4")


def test_path_formula_indices():
    path = edges(AssignOp("x", LinExpr.constant(0)), AssignOp("x", x + 1), AssumeOp(compare(x, "==", 1)))
    pf = path_formula(path)
    assert pf.indices[-1] == {"x": 2}
    assert pf.conjuncts[2] == compare(LinExpr.var("x#2"), "==", 1)
    assert check_sat(pf.formula) is not None


def test_infeasible_path():
    path = edges(AssignOp("x", LinExpr.constant(0)), AssumeOp(compare(x, "!=", 0)))
    assert check_sat(path_formula(path).formula) is None


def test_havoc_records_position():
    pf = path_formula(edges(AssignOp("x", LinExpr.constant(1)), HavocOp("x"), AssumeOp(compare(x, "==", 5))))
    assert pf.havocs == {1: "x#2"}
    assert check_sat(pf.formula)["x#2"] == 5


def test_weakest_preconditions():
    post = compare(x, "<=", 3)
    assert weakest_precondition(AssignOp("x", x + 1), post) == compare(x, "<=", 2)
    assert weakest_precondition(AssumeOp(compare(y, "==", 0)), FALSE) == compare(y, "!=", 0)
    hv = weakest_precondition(HavocOp("x"), post, 7)
    assert atoms(hv) == {compare(LinExpr.var("x!7"), "<=", 3)}


def test_wp_chain_of_infeasible_path_is_valid():
    path = edges(AssignOp("x", LinExpr.constant(0)), AssignOp("y", x + 1), AssumeOp(compare(y, "==", 0)))
    chain = wp_chain(path)
    assert len(chain) == 4 and chain[-1] == FALSE
    assert entails(TRUE, chain[0])
    assert chain[2] == compare(y, "!=", 0)
    assert chain[1] == compare(x, "!=", -1)
