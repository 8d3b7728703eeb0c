from __future__ import annotations

from precision_reuse.cfa import AssignOp, AssumeOp, CallOp, HavocOp, ReturnOp, SkipOp, build_cfa, op_variables
from precision_reuse.corpus import all_programs
from precision_reuse.minimp import parse_program


def cfa_of(src):
    return build_cfa(parse_program(src))


def test_straight_line_program():
    c = cfa_of("void main() { int x = 0; x = x + 1; assume(x > 0); }")
    assert sorted(c.locations) == [1, 2, 3, 4]
    assert [(e.source, e.target) for e in c.edges] == [(1, 2), (2, 3), (3, 4)]
    assert [type(e.op) for e in c.edges] == [AssignOp, AssignOp, AssumeOp]
    assert c.entry == 1 and c.exit == 4
    assert not c.loop_heads and not c.error_locations


def test_loop_head_and_error():
    c = cfa_of("void main() { int i = 0; while (i < 3) { i = i + 1; } if (i != 3) error(); }")
    assert c.loop_heads == {2}
    assert len(c.error_locations) == 1
    (err,) = c.error_locations
    assert c.out_edges(err) and isinstance(c.out_edges(err)[0].op, SkipOp) or not c.out_edges(err)


def test_inlined_calls_numbered_after_main():
    c = build_cfa(parse_program(open(next(p.path for p in all_programs() if p.name == "lock_basic")).read()))
    main_locs = c.locations_of("main")
    assert main_locs == list(range(1, len(main_locs) + 1))
    assert min(c.locations_of("acquire")) > max(main_locs)
    assert min(c.locations_of("release")) > max(c.locations_of("acquire"))
    kinds = {type(e.op) for e in c.edges}
    assert CallOp in kinds and ReturnOp in kinds
    assert c.variables == {"lock"}


def test_input_becomes_havoc():
    c = cfa_of("void main() { int x = input(); assume(x >= 0); }")
    assert isinstance(c.edges[0].op, HavocOp)
    assert op_variables(c.edges[1].op) == {"x"}


def test_numbering_is_deterministic_and_shift_local():
    a = cfa_of("void main() { int x = 0; int y = 0; while (x < 3) x = x + 1; }")
    b = cfa_of("void main() { int x = 0; int t = 0; int y = 0; while (x < 3) x = x + 1; }")
    assert a.edges == cfa_of("void main() { int x = 0; int y = 0; while (x < 3) x = x + 1; }").edges
    # inserting one statement shifts later locations by one
    assert b.loop_heads == {h + 1 for h in a.loop_heads}


def test_every_corpus_program_builds():
    for prog in all_programs():
        c = build_cfa(parse_program(prog.source()))
        assert c.entry in c.locations
        for e in c.edges:
            assert e.source in c.locations and e.target in c.locations
