from __future__ import annotations

import logging

import pytest
from hypothesis import given

from precision_reuse.cfa import build_cfa
from precision_reuse.formula import LinExpr, compare
from precision_reuse.minimp import parse_program
from precision_reuse.precision import (
    EXPLICIT,
    FUNCTION,
    GLOBAL,
    LOCATION,
    PREDICATE,
    PrecisionFormatError,
    ProgramPrecision,
    effective_precision_at,
    parse_selectors,
    read_precision_file,
    rescope,
    union,
    write_precision_file,
)

from strategies import program_precisions

lock, x = LinExpr.var("lock"), LinExpr.var("x")

EXPLICIT_FIGURE = b"*:\nlock\n\nf main:\nx\n"
PREDICATE_FIGURE = b"""(declare-fun |lock|() Real)
(declare-fun |x|() Real)
(define-fun t1() Bool (= |lock| 0))
(define-fun t2() Bool (<= |x| 1))

*:
(assert t1)

f main:
(assert t2)
"""


def test_explicit_figure_parses_to_layers():
    p = read_precision_file(EXPLICIT_FIGURE, EXPLICIT)
    assert p.global_ == {"lock"}
    assert p.per_function == {"f": {"x"}, "main": {"x"}}
    assert p.per_location == {}
    assert write_precision_file(p) == EXPLICIT_FIGURE


def test_predicate_figure_parses_to_layers():
    p = read_precision_file(PREDICATE_FIGURE, PREDICATE)
    assert p.global_ == {compare(lock, "==", 0)}
    assert p.per_function == {"f": {compare(x, "<=", 1)}, "main": {compare(x, "<=", 1)}}
    assert read_precision_file(write_precision_file(p), PREDICATE) == p


def test_effective_precision_is_layer_union():
    p = ProgramPrecision(EXPLICIT, {"g"}, {"main": {"m"}}, {3: {"l"}})
    assert p.at(3, "main") == {"g", "m", "l"}
    assert p.at(4, "main") == {"g", "m"}
    assert p.at(3, None) == {"g", "l"}
    cfa = build_cfa(parse_program("void main() { int a = 0; int b = 0; int c = 0; }"))
    assert effective_precision_at(p, 3, cfa) == {"g", "m", "l"}


def test_location_selectors_and_errors():
    assert parse_selectors("12 main *:") == [12, "main", "*"]
    with pytest.raises(PrecisionFormatError):
        parse_selectors("main")
    with pytest.raises(PrecisionFormatError):
        read_precision_file(b"x\n", EXPLICIT)
    with pytest.raises(PrecisionFormatError):
        read_precision_file(b"main:\nnot a var\n", EXPLICIT)
    with pytest.raises(PrecisionFormatError):
        read_precision_file(b"(declare-fun |x|() Int)\n\nmain:\n(assert t9)\n", PREDICATE)


def test_empty_files():
    assert read_precision_file(b"", EXPLICIT).is_empty()
    assert read_precision_file(b"", PREDICATE).is_empty()
    assert write_precision_file(ProgramPrecision(PREDICATE)) == b""
    assert write_precision_file(ProgramPrecision(EXPLICIT)) == b""


def test_kind_mismatch_rejected():
    with pytest.raises(ValueError):
        union(ProgramPrecision(EXPLICIT), ProgramPrecision(PREDICATE))


@given(program_precisions(), program_precisions())
def test_union_laws(a, b):
    if a.kind != b.kind:
        return
    assert a | b == b | a
    assert a | a == a
    assert a | ProgramPrecision(a.kind) == a
    for loc in (1, 5, 30):
        for f in ("main", "f", None):
            assert (a | b).at(loc, f) == a.at(loc, f) | b.at(loc, f)


@given(program_precisions(), program_precisions(), program_precisions())
def test_union_associative(a, b, c):
    if a.kind == b.kind == c.kind:
        assert (a | b) | c == a | (b | c)


@given(program_precisions())
def test_write_read_round_trip(p):
    data = write_precision_file(p)
    q = read_precision_file(data, p.kind)
    assert q == p
    assert write_precision_file(q) == data


CFA_SRC = "void f() { int y = 1; } void main() { int x = 0; f(); x = 1; }"


def test_rescope_strategies():
    cfa = build_cfa(parse_program(CFA_SRC))
    loc_in_f = cfa.locations_of("f")[0]
    p = ProgramPrecision(EXPLICIT, {"g"}, {"main": {"m"}}, {1: {"a"}, loc_in_f: {"b"}, 999: {"gone"}})
    assert rescope(p, LOCATION, cfa) == ProgramPrecision(EXPLICIT, {"g"}, {}, {1: {"a"}, loc_in_f: {"b"}, 999: {"gone"}})
    assert rescope(p, FUNCTION, cfa) == ProgramPrecision(EXPLICIT, {"g"}, {"main": {"m", "a"}, "f": {"b"}})
    assert rescope(p, GLOBAL, cfa) == ProgramPrecision(EXPLICIT, {"g", "m", "a", "b", "gone"})
    with pytest.raises(ValueError):
        rescope(p, "nowhere", cfa)


def test_rescope_warns_on_missing_location(caplog):
    cfa = build_cfa(parse_program(CFA_SRC))
    with caplog.at_level(logging.WARNING):
        rescope(ProgramPrecision(EXPLICIT, per_location={999: {"z"}}), FUNCTION, cfa)
    assert "999" in caplog.text


@given(program_precisions())
def test_global_scope_is_coarsest(p):
    cfa = build_cfa(parse_program(CFA_SRC))
    g = rescope(p, GLOBAL, cfa)
    fn = rescope(p, FUNCTION, cfa)
    for loc, func in cfa.locations.items():
        assert fn.at(loc, func) <= g.at(loc, func)
        assert p.at(loc, func) <= g.at(loc, func)
