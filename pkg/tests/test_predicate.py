from __future__ import annotations

import pytest
from hypothesis import given, settings

from precision_reuse.cfa import AssignOp, AssumeOp, CfaEdge
from precision_reuse.formula import FALSE, TRUE, LinExpr, compare, conj, disj, variables
from precision_reuse.precision import PREDICATE, ProgramPrecision
from precision_reuse.predicate import (
    BOOLEAN,
    CARTESIAN,
    PredicateDomain,
    PredicateState,
    RefinementError,
    compute_abstraction,
    is_block_end,
    merge_predicate,
    refine_predicate,
    replay_predicate,
)
from precision_reuse.solver import Solver, check_sat, entails

from helpers import cfa_of, corpus_cfa, error_path
from strategies import formulas, predicates

x, y = LinExpr.var("x"), LinExpr.var("y")


def test_cartesian_loses_correlation_boolean_keeps_it():
    phi = compare(x + y, "==", 0)
    preds = [compare(x, "<=", 0), compare(y, "<=", 0)]
    assert compute_abstraction(phi, preds, CARTESIAN) == TRUE
    boolean = compute_abstraction(phi, preds, BOOLEAN)
    # x <= 0 or y <= 0 holds whenever x + y = 0
    assert entails(boolean, disj(*preds))
    assert entails(phi, boolean)
    assert not entails(TRUE, boolean)


def test_abstraction_of_point():
    phi = compare(x, "==", 3)
    preds = [compare(x, "<=", 4), compare(x, "==", 5)]
    expected = conj(compare(x, "<=", 4), compare(x, "!=", 5))
    assert compute_abstraction(phi, preds, CARTESIAN) == expected
    assert entails(compute_abstraction(phi, preds, BOOLEAN), expected)


def test_unsat_abstracts_to_false():
    assert compute_abstraction(FALSE, [compare(x, "<=", 0)], BOOLEAN) == FALSE


@settings(max_examples=60)
@given(formulas(["x", "y"], max_leaves=4), predicates(["x", "y"]))
def test_abstraction_chain(phi, preds):
    if check_sat(phi) is None:
        return
    b = compute_abstraction(phi, preds, BOOLEAN)
    c = compute_abstraction(phi, preds, CARTESIAN)
    assert entails(phi, b)
    assert entails(b, c)
    assert variables(b) <= {v for p in preds for v in p.variables}


def test_block_ends():
    cfa = corpus_cfa("counter_const_loop")
    ends = sorted(l for l in cfa.locations if is_block_end(l, cfa))
    assert ends == sorted({cfa.entry, cfa.exit} | cfa.loop_heads | cfa.error_locations)


def test_successor_accumulates_inside_block():
    cfa = corpus_cfa("counter_const_loop")
    dom = PredicateDomain(cfa)
    s0 = dom.initial()
    s1 = dom.successor(s0, cfa.out_edges(1)[0], [compare(x, "<=", 4)])  # reaches the loop head
    assert dom.abstractions == 1
    assert s1.path_formula == TRUE
    assert s1.abstraction == compare(x, "<=", 4)
    s2 = dom.successor(s1, cfa.out_edges(2)[0], [])  # x <= 4 into the body, not a block end
    assert dom.abstractions == 1 and s2.abstraction == s1.abstraction


def test_merge_diamond_inside_block():
    cfa = cfa_of("void main() { int x = 0; int y = 0; if (*) { x = 1; } else { y = 1; } x = x; }")
    inner = next(l for l in cfa.locations if not is_block_end(l, cfa))
    s1 = PredicateState(TRUE, compare(LinExpr.var("x#1"), "==", 1), (("x", 1),))
    s2 = PredicateState(TRUE, compare(LinExpr.var("y#1"), "==", 1), (("y", 1),))
    m = merge_predicate(s1, s2, inner, cfa)
    assert m is not None and m.ssa_map == {"x": 1, "y": 1}
    # each side is aligned to the joint SSA map
    assert entails(conj(s1.path_formula, compare(LinExpr.var("y#1"), "==", y)), m.path_formula)
    assert merge_predicate(s1, s2, cfa.entry, cfa) is None
    assert merge_predicate(s1, PredicateState(compare(x, "<=", 0)), inner, cfa) is None


def test_refinement_finds_lock_predicate():
    cfa = corpus_cfa("lock_basic")
    path = error_path(cfa, lambda es: es[0])
    inc, pivot = refine_predicate(path, ProgramPrecision(PREDICATE), cfa)
    lock = LinExpr.var("lock")
    assert inc == ProgramPrecision(PREDICATE, per_function={"main": {compare(lock, "==", 0)}})
    assert pivot == 1  # the loop head right after lock := 0
    states = replay_predicate(path, inc, cfa, BOOLEAN, Solver())
    assert states[-1] is None


def test_refinement_golden_loop_predicates():
    cfa = corpus_cfa("counter_const_loop")
    # x := 0, exit the loop, violate the assertion
    path = error_path(cfa, lambda es: next((e for e in es if str(e.op) == "[x >= 5]"), es[0]))
    inc, _ = refine_predicate(path, ProgramPrecision(PREDICATE), cfa)
    assert inc.per_function["main"] == {compare(x, "<=", 4), compare(x, "==", 5)}


def test_feasible_path_is_rejected():
    cfa = corpus_cfa("lock_double_acquire")
    from precision_reuse.engine import verify

    run = verify(cfa, PREDICATE)
    path = run.verdict.counterexample.path
    with pytest.raises(RefinementError):
        refine_predicate(path, ProgramPrecision(PREDICATE), cfa)
