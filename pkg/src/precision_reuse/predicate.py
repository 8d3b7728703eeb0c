"""Predicate abstraction with abstraction at loop heads.

A state is an abstraction over program variables, valid at the last block
end, plus the SSA path formula of the edges taken since then.  Abstractions
are only computed at block ends: loop heads, the entry and exit of ``main``,
and error locations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .cfa import Cfa, CfaEdge
from .formula import (
    EQ,
    FALSE,
    TRUE,
    Atom,
    Formula,
    LinExpr,
    atoms,
    conj,
    disj,
    evaluate_partial,
    make_atom,
    neg,
    rename,
    variables,
)
from .paths import edge_constraint, is_fresh, path_formula, ssa_name, wp_chain
from .precision import PREDICATE, ProgramPrecision, atom_sort_key
from .solver import Solver

CARTESIAN = "cartesian"
BOOLEAN = "boolean"
MODES = (CARTESIAN, BOOLEAN)
DEFAULT_MODE = BOOLEAN


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class PredicateState:
    abstraction: Formula = TRUE
    path_formula: Formula = TRUE
    ssa: tuple[tuple[str, int], ...] = ()

    @property
    def ssa_map(self) -> dict[str, int]:
        return dict(self.ssa)

    def __str__(self) -> str:
        if self.path_formula == TRUE:
            return str(self.abstraction)
        return f"{self.abstraction} | {self.path_formula}"


def is_block_end(loc: int, cfa: Cfa) -> bool:
    return loc in cfa.loop_heads or loc == cfa.entry or loc == cfa.exit or loc in cfa.error_locations


def _relevant(preds: Iterable[Atom], phi: Formula) -> list[Atom]:
    fv = variables(phi)
    return sorted((p for p in preds if p.variables & fv), key=atom_sort_key)


def _satisfied_by(model: dict[str, int] | None, lit: Formula) -> bool:
    return model is not None and evaluate_partial(lit, model) is True


def compute_abstraction(
    phi: Formula,
    preds: Iterable[Atom],
    mode: str = DEFAULT_MODE,
    solver: Solver | None = None,
    model: dict[str, int] | None = None,
) -> Formula:
    """Strongest cartesian or boolean combination of ``preds`` implied by ``phi``.

    ``phi`` must be satisfiable; ``model`` may carry a known model of it, which
    lets some solver calls be skipped.  Predicates sharing no variable with
    ``phi`` cannot be decided by it and are skipped.
    """
    solver = solver or Solver()
    preds = _relevant(preds, phi)
    if model is None:
        model = solver.check_sat(phi)
        if model is None:
            return FALSE
    if mode == CARTESIAN:
        parts = []
        for p in preds:
            for lit in (p, neg(p)):
                if _satisfied_by(model, neg(lit)):
                    continue
                if solver.check_sat(conj(phi, neg(lit))) is None:
                    parts.append(lit)
                    break
        return conj(*parts)
    if mode != BOOLEAN:
        raise ValueError(f"unknown abstraction mode {mode!r}")

    def expand(i: int, ctx: Formula, m: dict[str, int]) -> Formula:
        if i == len(preds):
            return TRUE
        branches = []
        for lit in (preds[i], neg(preds[i])):
            sub = m if _satisfied_by(m, lit) else solver.check_sat(conj(phi, ctx, lit))
            if sub is None:
                continue
            branches.append((lit, expand(i + 1, conj(ctx, lit), sub)))
        if len(branches) == 2 and branches[0][1] == branches[1][1]:
            return branches[0][1]
        return disj(*(conj(lit, rest) for lit, rest in branches))

    return expand(0, TRUE, model)


@dataclass
class PredicateDomain:
    """Successor computation for one verification run."""

    cfa: Cfa
    mode: str = DEFAULT_MODE
    solver: Solver | None = None
    abstractions: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown abstraction mode {self.mode!r}")
        if self.solver is None:
            self.solver = Solver()

    def initial(self) -> PredicateState:
        return PredicateState()

    def successor(self, s: PredicateState, e: CfaEdge, pi_target: Iterable[Atom], count: bool = True) -> PredicateState | None:
        return successor_predicate(s, e, pi_target, self.mode, self.cfa, self.solver, self if count else None)

    def is_covered(self, s: PredicateState, by: PredicateState, loc: int) -> bool:
        if not is_block_end(loc, self.cfa):
            return False
        return self.solver.entails(s.abstraction, by.abstraction)


def successor_predicate(
    s: PredicateState,
    e: CfaEdge,
    pi_target: Iterable[Atom],
    mode: str,
    cfa: Cfa,
    solver: Solver,
    counter: PredicateDomain | None = None,
) -> PredicateState | None:
    constraint, ssa, _ = edge_constraint(e.op, s.ssa_map)
    path = conj(s.path_formula, constraint)
    if path == FALSE:
        return None
    if not is_block_end(e.target, cfa):
        return PredicateState(s.abstraction, path, tuple(sorted(ssa.items())))
    if counter is not None:
        counter.abstractions += 1
    phi = conj(s.abstraction, path)
    model = solver.check_sat(phi)
    if model is None:
        return None
    to_ssa = {x: ssa_name(x, i) for x, i in ssa.items() if i}
    back = {v: k for k, v in to_ssa.items()}
    preds = [rename(p, to_ssa) for p in pi_target]
    abstraction = compute_abstraction(phi, preds, mode, solver, model)
    return PredicateState(rename(abstraction, back), TRUE, ())


def merge_predicate(s1: PredicateState, s2: PredicateState, at: int, cfa: Cfa) -> PredicateState | None:
    """Join two states inside a block; ``None`` means keep them separate."""
    if is_block_end(at, cfa) or s1.abstraction != s2.abstraction:
        return None
    m1, m2 = s1.ssa_map, s2.ssa_map
    merged = {x: max(m1.get(x, 0), m2.get(x, 0)) for x in set(m1) | set(m2)}

    def align(pf: Formula, m: dict[str, int]) -> Formula:
        eqs = []
        for x, i in merged.items():
            j = m.get(x, 0)
            if j != i:
                eqs.append(make_atom(LinExpr.var(ssa_name(x, i)) - LinExpr.var(ssa_name(x, j)), EQ))
        return conj(pf, *eqs)

    path = disj(align(s1.path_formula, m1), align(s2.path_formula, m2))
    return PredicateState(s1.abstraction, path, tuple(sorted(merged.items())))


def _positions(path: Sequence[CfaEdge]) -> list[int]:
    return [path[0].source] + [e.target for e in path] if path else []


def _harvest(f: Formula) -> set[Atom]:
    return {a for a in atoms(f) if not any(is_fresh(v) for v in a.variables)}


def refine_predicate(
    path: Sequence[CfaEdge],
    current: ProgramPrecision,
    cfa: Cfa,
    solver: Solver | None = None,
    mode: str = DEFAULT_MODE,
) -> tuple[ProgramPrecision, int]:
    """Predicates from weakest preconditions of ``false`` along an infeasible path.

    Atoms of the precondition at every block end the path crosses are added
    for the function owning that block end.  If that yields nothing new, the
    atoms of all intermediate preconditions are added for the functions of
    all crossed block ends.  Also returns the first path position whose
    abstract state changes under the refined precision.
    """
    solver = solver or Solver()
    if solver.check_sat(path_formula(path).formula) is not None:
        raise RefinementError("path is feasible")
    chain = wp_chain(path)
    locs = _positions(path)
    block_ends = [i for i in range(1, len(locs) - 1) if is_block_end(locs[i], cfa)]

    increment = ProgramPrecision(PREDICATE)
    fresh = False
    for i in block_ends:
        f = cfa.locations[locs[i]]
        for a in _harvest(chain[i]):
            if a not in current.at(locs[i], f):
                fresh = True
            increment = increment.with_function(f, [a])
    if fresh:
        return increment, _pivot(path, current, current | increment, cfa, mode, solver)
    everything: set[Atom] = set()
    for w in chain:
        everything |= _harvest(w)
    targets = block_ends or list(range(len(locs)))
    for i in targets:
        f = cfa.locations[locs[i]]
        new = everything - current.at(locs[i], f)
        if new:
            fresh = True
        increment = increment.with_function(f, everything)
    if not fresh:
        raise RefinementError("no new predicates found")
    return increment, _pivot(path, current, current | increment, cfa, mode, solver)


def replay_predicate(
    path: Sequence[CfaEdge], precision: ProgramPrecision, cfa: Cfa, mode: str, solver: Solver
) -> list[PredicateState | None]:
    """Abstract states along ``path``, stopping after the first infeasible one."""
    states: list[PredicateState | None] = [PredicateState()]
    for e in path:
        pi = precision.at(e.target, cfa.locations[e.target])
        nxt = successor_predicate(states[-1], e, pi, mode, cfa, solver)
        states.append(nxt)
        if nxt is None:
            break
    return states


def _pivot(path, old: ProgramPrecision, new: ProgramPrecision, cfa: Cfa, mode: str, solver: Solver) -> int:
    before = replay_predicate(path, old, cfa, mode, solver)
    after = replay_predicate(path, new, cfa, mode, solver)
    for i in range(min(len(before), len(after))):
        if before[i] != after[i]:
            return i
    return min(len(before), len(after))
