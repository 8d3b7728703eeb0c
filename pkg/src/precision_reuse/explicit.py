"""Explicit-value analysis: variables map to integers or are unknown."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .cfa import AssignOp, AssumeOp, Cfa, CfaEdge, HavocOp, op_variables
from .formula import EQ, And, Atom, Formula, evaluate_partial
from .precision import EXPLICIT, ProgramPrecision


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class AbstractAssignment:
    """Known variable values; absent variables are unknown (top).

    The infeasible state is represented by ``None`` rather than an instance.
    """

    items: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def of(values: Mapping[str, int]) -> "AbstractAssignment":
        return AbstractAssignment(tuple(sorted(values.items())))

    @property
    def values(self) -> dict[str, int]:
        return dict(self.items)

    def get(self, var: str) -> int | None:
        for v, k in self.items:
            if v == var:
                return k
        return None

    def __str__(self) -> str:
        return "{" + ", ".join(f"{v}->{k}" for v, k in self.items) + "}"


TOP = AbstractAssignment()


def restrict(v: AbstractAssignment, pi: Iterable[str]) -> AbstractAssignment:
    pi = pi if isinstance(pi, (set, frozenset)) else set(pi)
    return AbstractAssignment(tuple((x, k) for x, k in v.items if x in pi))


def _propagate_equalities(cond: Formula, env: dict[str, int]) -> bool:
    """Bind the single unknown of each equality conjunct; False if none is integral."""
    conjuncts = cond.args if isinstance(cond, And) else (cond,)
    changed = True
    while changed:
        changed = False
        for c in conjuncts:
            if not (isinstance(c, Atom) and c.op == EQ):
                continue
            unknown = [(x, k) for x, k in c.coeffs if x not in env]
            if len(unknown) != 1:
                continue
            x, k = unknown[0]
            rest = c.bound - sum(k2 * env[y] for y, k2 in c.coeffs if y != x)
            if rest % k:
                return False
            env[x] = rest // k
            changed = True
    return True


def successor_explicit(v: AbstractAssignment, e: CfaEdge, pi_target: Iterable[str]) -> AbstractAssignment | None:
    env = v.values
    op = e.op
    if isinstance(op, AssignOp):
        val = op.expr.evaluate_partial(env)
        if val is None:
            env.pop(op.var, None)
        else:
            env[op.var] = val
    elif isinstance(op, HavocOp):
        env.pop(op.var, None)
    elif isinstance(op, AssumeOp):
        if evaluate_partial(op.cond, env) is False:
            return None
        if not _propagate_equalities(op.cond, env):
            return None
        if evaluate_partial(op.cond, env) is False:
            return None
    return restrict(AbstractAssignment.of(env), pi_target)


def is_covered(v: AbstractAssignment, by: AbstractAssignment) -> bool:
    """``by`` represents every concrete state of ``v``."""
    return set(by.items) <= set(v.items)


def execute_path(path: Sequence[CfaEdge], precisions: Sequence[frozenset]) -> list[AbstractAssignment | None]:
    """Abstract states along ``path``; ``precisions[i]`` applies after edge ``i``.

    The result has one entry per path position and stops after the first
    infeasible state.
    """
    states: list[AbstractAssignment | None] = [TOP]
    for e, pi in zip(path, precisions):
        nxt = successor_explicit(states[-1], e, pi)
        states.append(nxt)
        if nxt is None:
            break
    return states


def path_precisions(path: Sequence[CfaEdge], cfa: Cfa, precision: ProgramPrecision, extra: frozenset = frozenset()) -> list[frozenset]:
    return [precision.at(e.target, cfa.locations[e.target]) | extra for e in path]


def _occurrence_scopes(path: Sequence[CfaEdge], cfa: Cfa, variables: Iterable[str]) -> dict[str, set[str]]:
    """Functions visited between the first and last occurrence of each variable."""
    used = [op_variables(e.op) for e in path]
    scopes: dict[str, set[str]] = {}
    for x in variables:
        idx = [i for i, vs in enumerate(used) if x in vs]
        if not idx:
            continue
        funcs = set()
        for i in range(idx[0], idx[-1] + 1):
            funcs.add(cfa.locations[path[i].source])
            funcs.add(cfa.locations[path[i].target])
        scopes[x] = funcs
    return scopes


def refine_explicit(path: Sequence[CfaEdge], current: ProgramPrecision, cfa: Cfa) -> tuple[ProgramPrecision, int]:
    """Find variables whose tracking refutes ``path``.

    Starting from every variable on the path, variables are dropped greedily
    in path order as long as the abstract re-execution still becomes
    infeasible.  Each surviving variable is added for every function that the
    path visits between the variable's first and last occurrence, so it stays
    tracked across calls.  Returns the increment and the first path position
    whose abstract state changes.
    """
    order: list[str] = []
    for e in path:
        for x in sorted(op_variables(e.op)):
            if x not in order:
                order.append(x)
    base = path_precisions(path, cfa, current)

    def refuted(extra: frozenset) -> bool:
        return execute_path(path, [p | extra for p in base])[-1] is None

    if refuted(frozenset()):
        raise RefinementError("path is already infeasible under the current precision")
    keep = list(order)
    if not refuted(frozenset(keep)):
        raise RefinementError("path cannot be refuted by explicit values")
    for x in order:
        trial = frozenset(y for y in keep if y != x)
        if refuted(trial):
            keep.remove(x)

    increment = ProgramPrecision(EXPLICIT)
    for x, funcs in sorted(_occurrence_scopes(path, cfa, keep).items()):
        for f in sorted(funcs):
            increment = increment.with_function(f, [x])
    new = current | increment
    if not execute_path(path, path_precisions(path, cfa, new))[-1] is None:
        # the scoped increment missed a location; fall back to all functions
        for f in sorted(set(cfa.locations.values())):
            increment = increment.with_function(f, keep)
        new = current | increment
    return increment, first_difference(path, cfa, current, new)


def first_difference(path: Sequence[CfaEdge], cfa: Cfa, old: ProgramPrecision, new: ProgramPrecision) -> int:
    before = execute_path(path, path_precisions(path, cfa, old))
    after = execute_path(path, path_precisions(path, cfa, new))
    for i in range(min(len(before), len(after))):
        if before[i] != after[i]:
            return i
    return min(len(before), len(after))
