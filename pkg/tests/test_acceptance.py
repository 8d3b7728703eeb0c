"""Acceptance criteria, one test each, printing a PASS or FAIL line per criterion."""

from __future__ import annotations

import contextlib
import json
import random
import time

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ACCEPTANCE_LINES
from precision_reuse.cfa import build_cfa
from precision_reuse.cli import main
from precision_reuse.concrete import explore
from precision_reuse.corpus import SEQUENCES, all_programs, sequence_dirs
from precision_reuse.engine import RESOURCE_OUT, SAFE, Stats, VerifyOptions, dump_final_precision, verify
from precision_reuse.formula import Atom, LinExpr, compare, conj, evaluate, make_atom, variables
from precision_reuse.minimp import parse_program
from precision_reuse.precision import (
    EXPLICIT,
    FUNCTION,
    LOCATION,
    PREDICATE,
    ProgramPrecision,
    read_precision_file,
    rescope,
    write_precision_file,
)
from precision_reuse.predicate import BOOLEAN, CARTESIAN, compute_abstraction
from precision_reuse.regression import Report, TaskResult, compute_speedup, emit_report, load_sequence, run_sequence
from precision_reuse.solver import Solver, check_sat, entails

from grid import satisfiable_in_box
from strategies import formulas, predicates, program_precisions

CONFIGS = [(EXPLICIT, BOOLEAN), (PREDICATE, CARTESIAN), (PREDICATE, BOOLEAN)]


@contextlib.contextmanager
def criterion(n: int, title: str):
    detail: list[str] = []
    try:
        yield detail
    except BaseException:
        line = f"FAIL criterion {n}: {title}" + (f" ({'; '.join(detail)})" if detail else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    line = f"PASS criterion {n}: {title}" + (f" ({'; '.join(detail)})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)


def corpus_cfas():
    return [(p, build_cfa(parse_program(p.source()))) for p in all_programs()]


def run(cfa, domain, mode, initial=None):
    return verify(cfa, domain, initial, VerifyOptions(domain, mode))


# ---------------------------------------------------------------- 1


def test_oracle_agreement():
    with criterion(1, "verdicts agree with exhaustive enumeration in all configurations") as info:
        start = time.monotonic()
        disagreements = []
        checked = 0
        for prog, cfa in corpus_cfas():
            truth = explore(cfa)
            assert truth.verdict is not None, f"{prog.name}: {truth.reason}"
            for domain, mode in CONFIGS:
                got = run(cfa, domain, mode).verdict.kind.lower()
                checked += 1
                if got != truth.verdict:
                    disagreements.append(f"{prog.name}/{domain}/{mode}: {got} vs {truth.verdict}")
        elapsed = time.monotonic() - start
        info.append(f"{checked} runs, {elapsed:.1f}s")
        assert not disagreements, disagreements
        assert elapsed < 300


# ---------------------------------------------------------------- 2


def test_zero_refinement_reuse():
    with criterion(2, "unchanged Safe programs need 0 refinements with their own dump") as info:
        offenders = []
        count = 0
        for prog, cfa in corpus_cfas():
            for domain, mode in CONFIGS:
                first = run(cfa, domain, mode)
                if first.verdict.kind != SAFE:
                    continue
                stored = read_precision_file(dump_final_precision(first), domain)
                for scope in (LOCATION, FUNCTION):
                    again = run(cfa, domain, mode, rescope(stored, scope, cfa))
                    count += 1
                    if again.stats.refinements != 0 or again.verdict.kind != SAFE:
                        offenders.append(f"{prog.name}/{domain}/{mode}/{scope}: {again.stats.refinements}")
        info.append(f"{count} reruns")
        assert not offenders, offenders


# ---------------------------------------------------------------- 3


def random_precision(cfa, domain, rng: random.Random) -> ProgramPrecision:
    names = sorted(cfa.variables)
    funcs = sorted(set(cfa.locations.values()))
    locs = sorted(cfa.locations)

    def items():
        if domain == EXPLICIT:
            return rng.sample(names, rng.randint(0, len(names))) if names else []
        out = []
        for _ in range(rng.randint(0, 3)):
            if not names:
                break
            picked = rng.sample(names, rng.randint(1, min(2, len(names))))
            expr = LinExpr.of({v: rng.choice([-2, -1, 1, 2]) for v in picked})
            a = make_atom(expr - rng.randint(-3, 8), rng.choice(["<=", "=="]))
            if isinstance(a, Atom):
                out.append(a)
        return out

    p = ProgramPrecision(domain, items())
    for f in rng.sample(funcs, rng.randint(0, len(funcs))):
        p = p.with_function(f, items())
    for loc in rng.sample(locs, min(len(locs), rng.randint(0, 4))):
        p = p.with_location(loc, items())
    return p


def test_reuse_soundness():
    with criterion(3, "verdicts identical for empty, dumped and random initial precisions") as info:
        rng = random.Random(20241016)
        mismatches = []
        count = 0
        for prog, cfa in corpus_cfas():
            for domain, mode in CONFIGS:
                base = run(cfa, domain, mode)
                starts = [read_precision_file(dump_final_precision(base), domain)]
                starts += [random_precision(cfa, domain, rng) for _ in range(2)]
                for initial in starts:
                    count += 1
                    got = run(cfa, domain, mode, initial).verdict.kind
                    if got != base.verdict.kind or got == RESOURCE_OUT:
                        mismatches.append(f"{prog.name}/{domain}/{mode}: {got} vs {base.verdict.kind}")
        info.append(f"{count} reruns")
        assert not mismatches, mismatches


# ---------------------------------------------------------------- 4


def test_refinement_dominance():
    with criterion(4, "reuse never needs more refinements; one sequence drops more than 5x") as info:
        worse = []
        best = (0.0, "")
        for d in sequence_dirs():
            for domain in (EXPLICIT, PREDICATE):
                rep = run_sequence(load_sequence(d, domain=domain))
                with_r = rep.totals("reuse")["refinements"]
                without = rep.totals("baseline")["refinements"]
                if with_r > without:
                    worse.append(f"{d.name}/{domain}: {with_r} > {without}")
                ratio = without / with_r if with_r else float("inf") if without else 1.0
                if ratio > best[0]:
                    best = (ratio, f"{d.name}/{domain}: {without} -> {with_r}")
        info.append(f"best {best[1]}")
        assert not worse, worse
        assert best[0] > 5


# ---------------------------------------------------------------- 5


def test_scope_sensitivity():
    with criterion(5, "shifted locations: location scope refines, function scope does not") as info:
        seq = lambda scope: load_sequence(SEQUENCES / "shift", domain=PREDICATE, scope=scope)  # noqa: E731
        by_loc = run_sequence(seq(LOCATION), compare=False).with_reuse
        by_fn = run_sequence(seq(FUNCTION), compare=False).with_reuse
        loc_r2 = by_loc[1].stats.refinements
        fn_r2 = by_fn[1].stats.refinements
        info.append(f"r2 refinements: location {loc_r2}, function {fn_r2}")
        assert loc_r2 >= 1
        assert fn_r2 == 0
        assert by_loc[1].verdict == by_fn[1].verdict == SAFE


# ---------------------------------------------------------------- 6

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


def test_format_fidelity():
    with criterion(6, "example files parse exactly; 200 random precisions round-trip") as info:
        x, lock = LinExpr.var("x"), LinExpr.var("lock")
        assert read_precision_file(EXPLICIT_FIGURE, EXPLICIT) == ProgramPrecision(EXPLICIT, {"lock"}, {"f": {"x"}, "main": {"x"}})
        assert read_precision_file(PREDICATE_FIGURE, PREDICATE) == ProgramPrecision(
            PREDICATE, {compare(lock, "==", 0)}, {"f": {compare(x, "<=", 1)}, "main": {compare(x, "<=", 1)}}
        )
        seen = []

        @settings(max_examples=200, database=None, derandomize=True)
        @given(program_precisions())
        def round_trip(p):
            data = write_precision_file(p)
            q = read_precision_file(data, p.kind)
            assert q == p
            assert write_precision_file(q) == data
            assert write_precision_file(p) == data
            seen.append(p)

        round_trip()
        info.append(f"{len(seen)} precisions")
        assert len(seen) >= 200


# ---------------------------------------------------------------- 7


def test_abstraction_algebra():
    with criterion(7, "phi |= boolean |= cartesian, monotone in the predicate set") as info:
        solver = Solver()
        seen = []

        @settings(max_examples=500, database=None, derandomize=True)
        @given(formulas(["x", "y", "z"], max_leaves=4), predicates(["x", "y", "z"], max_size=3), predicates(["x", "y", "z"], max_size=2))
        def algebra(phi, pi, more):
            seen.append(1)
            bigger = pi + more
            b = compute_abstraction(phi, pi, BOOLEAN, solver)
            c = compute_abstraction(phi, pi, CARTESIAN, solver)
            assert solver.entails(phi, b)
            assert solver.entails(b, c)
            for mode in (BOOLEAN, CARTESIAN):
                assert solver.entails(compute_abstraction(phi, bigger, mode, solver), compute_abstraction(phi, pi, mode, solver))

        algebra()
        info.append(f"{len(seen)} instances")
        assert len(seen) >= 500


# ---------------------------------------------------------------- 8


def box_agrees(f) -> bool:
    names = sorted(variables(f))
    bounds = [conj(compare(LinExpr.var(v), ">=", -8), compare(LinExpr.var(v), "<=", 8)) for v in names]
    bounded = conj(f, *bounds)
    model = check_sat(bounded)
    if model is not None and not evaluate(bounded, {**{v: 0 for v in names}, **model}):
        return False
    return (model is not None) == satisfiable_in_box(f)


def test_solver_correctness():
    with criterion(8, "check_sat agrees with box enumeration on 1000 formulas") as info:
        x = LinExpr.var("x")
        y = LinExpr.var("y")
        assert check_sat(make_atom(x.scale(2) - 1, "==")) is None
        assert check_sat(make_atom(x.scale(4) + y.scale(6) - 3, "==")) is None
        seen = []

        @settings(max_examples=1000, database=None, derandomize=True)
        @given(formulas(["x", "y", "z", "w"], max_leaves=5))
        def agree(f):
            seen.append(1)
            assert box_agrees(f), f

        agree()
        info.append(f"{len(seen)} formulas")


# ---------------------------------------------------------------- 9


def task(rev, cpu, verdict=SAFE):
    return TaskResult(rev, verdict, Stats(cpu_time=cpu))


def test_speedup_reporting(capsys):
    with criterion(9, "speedup excludes first and unsolved revisions") as info:
        # hand-computed: r2 and r4 count, r1 is first and r3 is unsolved by the reuse run
        baseline = [task("r1", 8.0), task("r2", 3.0), task("r3", 2.0), task("r4", 1.5)]
        reuse = [task("r1", 8.0), task("r2", 0.5), task("r3", 0.25, RESOURCE_OUT), task("r4", 0.5)]
        rep = Report("golden", PREDICATE, FUNCTION, BOOLEAN, reuse, baseline)
        golden = json.loads(emit_report(rep, "json"))
        assert golden["speedup"] == 4.5  # (3.0 + 1.5) / (0.5 + 0.5)
        csv_last = emit_report(rep, "csv").decode().splitlines()[-1]
        assert csv_last.startswith("speedup,") and "4.5" in csv_last

        assert main(["sequence", str(SEQUENCES / "long_loop"), "--compare", "--report", "json"]) == 0
        out = json.loads(capsys.readouterr().out)
        restored = Report.from_dict(out)
        expected = compute_speedup(restored.without_reuse, restored.with_reuse)
        num = sum(b.stats.cpu_time for b, r in zip(restored.without_reuse[1:], restored.with_reuse[1:]) if b.solved and r.solved)
        den = sum(r.stats.cpu_time for b, r in zip(restored.without_reuse[1:], restored.with_reuse[1:]) if b.solved and r.solved)
        assert out["speedup"] == expected == num / den
        info.append(f"golden 4.5, long_loop {out['speedup']:.2f}")
