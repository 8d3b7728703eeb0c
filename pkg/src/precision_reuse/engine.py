"""The CEGAR loop with lazy abstraction over an abstract reachability graph."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import explicit, predicate
from .cfa import Cfa, CfaEdge
from .explicit import AbstractAssignment
from .paths import SSA_SEP, path_formula
from .precision import EXPLICIT, PREDICATE, ProgramPrecision, write_precision_file
from .solver import DEFAULT_NODE_BUDGET, Solver, SolverBudgetExceeded

SAFE = "Safe"
UNSAFE = "Unsafe"
RESOURCE_OUT = "ResourceOut"

DEFAULT_MAX_NODES = 1_000_000
DEFAULT_TIME_LIMIT = 60.0


@dataclass
class VerifyOptions:
    domain: str = PREDICATE
    abstraction: str = predicate.DEFAULT_MODE
    max_nodes: int = DEFAULT_MAX_NODES
    time_limit: float = DEFAULT_TIME_LIMIT
    solver_nodes: int = DEFAULT_NODE_BUDGET


@dataclass
class Stats:
    refinements: int = 0
    abstraction_computations: int = 0
    solver_calls: int = 0
    cpu_time: float = 0.0
    arg_nodes: int = 0
    precision_bytes_out: int = 0

    def as_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class Counterexample:
    path: list[CfaEdge]
    model: dict[str, int]
    inputs: list[tuple[int, str, int]]  # (path position, variable, value) per havoc
    initial: dict[str, int]  # values of variables read before being written

    def __str__(self) -> str:
        lines = [str(e) for e in self.path]
        if self.initial:
            lines.append("initial: " + ", ".join(f"{k}={v}" for k, v in sorted(self.initial.items())))
        if self.inputs:
            lines.append("inputs: " + ", ".join(f"{v}={x}" for _, v, x in self.inputs))
        return "\n".join(lines)


@dataclass
class Verdict:
    kind: str
    counterexample: Counterexample | None = None
    reason: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.reason})" if self.reason else self.kind


@dataclass
class RunResult:
    verdict: Verdict
    final: ProgramPrecision
    stats: Stats
    arg: "Arg | None" = None


# ---------------------------------------------------------------------- ARG


@dataclass
class ArgNode:
    id: int
    location: int
    state: Any
    parent: int | None = None
    edge: CfaEdge | None = None
    covering: int | None = None
    children: dict[int, int | None] = field(default_factory=dict)  # out-edge index -> child id (None: infeasible)


class Arg:
    def __init__(self) -> None:
        self.nodes: dict[int, ArgNode] = {}
        self.by_location: dict[int, list[int]] = {}
        self.covered: dict[int, set[int]] = {}
        self.waitlist: list[int] = []
        self.created = 0

    def add(self, location: int, state, parent: int | None = None, edge: CfaEdge | None = None) -> ArgNode:
        node = ArgNode(self.created, location, state, parent, edge)
        self.created += 1
        self.nodes[node.id] = node
        self.by_location.setdefault(location, []).append(node.id)
        return node

    def cover(self, node: ArgNode, by: ArgNode) -> None:
        node.covering = by.id
        self.covered.setdefault(by.id, set()).add(node.id)

    def path_to(self, node_id: int) -> list[ArgNode]:
        out = []
        cur: int | None = node_id
        while cur is not None:
            n = self.nodes[cur]
            out.append(n)
            cur = n.parent
        out.reverse()
        return out

    def subtree(self, node_id: int) -> list[int]:
        out, stack = [], [node_id]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(c for c in self.nodes[n].children.values() if c is not None)
        return out

    def push(self, node_id: int) -> None:
        self.waitlist.append(node_id)


def lazy_prune(arg: Arg, pivot: int) -> list[int]:
    """Remove the subtree below ``pivot`` and re-queue what depends on it.

    The parent of ``pivot`` goes back on the waitlist so that the removed
    branch is recomputed with the current precision; nodes covered by a
    removed node lose their coverage and are re-queued too.  Returns the
    removed node ids.
    """
    node = arg.nodes[pivot]
    removed = arg.subtree(pivot)
    removed_set = set(removed)
    for r in removed:
        n = arg.nodes.pop(r)
        arg.by_location[n.location].remove(r)
        if n.covering is not None and n.covering in arg.covered:
            arg.covered[n.covering].discard(r)
        for c in sorted(arg.covered.pop(r, ())):
            if c in removed_set or c not in arg.nodes:
                continue
            arg.nodes[c].covering = None
            arg.push(c)
    if node.parent is not None:
        parent = arg.nodes[node.parent]
        for k, v in list(parent.children.items()):
            if v == pivot:
                del parent.children[k]
        arg.push(parent.id)
    else:
        # the root itself: start over
        root = arg.add(node.location, node.state)
        arg.push(root.id)
    return removed


# ------------------------------------------------------------------ domains


class _ExplicitAdapter:
    def __init__(self, cfa: Cfa, solver: Solver):
        self.cfa = cfa
        self.solver = solver
        self.abstractions = 0

    def initial(self):
        return explicit.TOP

    def successor(self, s, e, pi):
        return explicit.successor_explicit(s, e, pi)

    def is_covered(self, s, by, loc):
        return explicit.is_covered(s, by)

    def replay(self, path, precision):
        return explicit.execute_path(path, explicit.path_precisions(path, self.cfa, precision))

    def refine(self, path, precision):
        inc, _ = explicit.refine_explicit(path, precision, self.cfa)
        return inc


class _PredicateAdapter:
    def __init__(self, cfa: Cfa, solver: Solver, mode: str):
        self.domain = predicate.PredicateDomain(cfa, mode, solver)
        self.cfa = cfa
        self.solver = solver
        self.mode = mode

    @property
    def abstractions(self) -> int:
        return self.domain.abstractions

    def initial(self):
        return self.domain.initial()

    def successor(self, s, e, pi):
        return self.domain.successor(s, e, pi)

    def is_covered(self, s, by, loc):
        return self.domain.is_covered(s, by, loc)

    def replay(self, path, precision):
        return predicate.replay_predicate(path, precision, self.cfa, self.mode, self.solver)

    def refine(self, path, precision):
        inc, _ = predicate.refine_predicate(path, precision, self.cfa, self.solver, self.mode)
        return inc


# -------------------------------------------------------------- feasibility


def check_feasibility(path: Sequence[CfaEdge], solver: Solver | None = None) -> Counterexample | None:
    """A concrete witness for ``path``, or ``None`` if the path is infeasible."""
    solver = solver or Solver()
    pf = path_formula(path)
    model = solver.check_sat(pf.formula)
    if model is None:
        return None
    model = dict(model)
    inputs = [(k, path[k].op.var, model.setdefault(name, 0)) for k, name in sorted(pf.havocs.items())]
    initial = {v: x for v, x in model.items() if SSA_SEP not in v}
    return Counterexample(list(path), model, inputs, initial)


# ---------------------------------------------------------------- the loop


class _Budget(Exception):
    pass


def verify(cfa: Cfa, domain: str = PREDICATE, initial: ProgramPrecision | None = None, opts: VerifyOptions | None = None) -> RunResult:
    """Run CEGAR on ``cfa`` starting from ``initial`` (empty if omitted)."""
    opts = opts or VerifyOptions(domain=domain)
    domain = domain or opts.domain
    precision = initial if initial is not None else ProgramPrecision(domain)
    if precision.kind != domain:
        raise ValueError(f"initial precision is {precision.kind}, analysis is {domain}")
    start = time.process_time()
    solver = Solver(opts.solver_nodes)
    dom = _ExplicitAdapter(cfa, solver) if domain == EXPLICIT else _PredicateAdapter(cfa, solver, opts.abstraction)
    stats = Stats()
    arg = Arg()

    def finish(verdict: Verdict) -> RunResult:
        stats.abstraction_computations = dom.abstractions
        stats.solver_calls = solver.calls
        stats.arg_nodes = arg.created
        final = dump_form(precision, cfa)
        stats.precision_bytes_out = len(write_precision_file(final))
        stats.cpu_time = time.process_time() - start
        return RunResult(verdict, final, stats, arg)

    def pi(loc: int) -> frozenset:
        return precision.at(loc, cfa.locations[loc])

    root = arg.add(cfa.entry, dom.initial())
    arg.push(root.id)
    try:
        while arg.waitlist:
            if arg.created >= opts.max_nodes:
                return finish(Verdict(RESOURCE_OUT, reason="node budget exhausted"))
            if time.process_time() - start > opts.time_limit:
                return finish(Verdict(RESOURCE_OUT, reason="time budget exhausted"))
            nid = arg.waitlist.pop()
            node = arg.nodes.get(nid)
            if node is None or node.covering is not None:
                continue
            for k, e in enumerate(cfa.out_edges(node.location)):
                if k in node.children:
                    continue
                succ = dom.successor(node.state, e, pi(e.target))
                if succ is None:
                    node.children[k] = None
                    continue
                child = arg.add(e.target, succ, node.id, e)
                node.children[k] = child.id
                if cfa.is_error(e.target):
                    outcome = _handle_error(arg, child, cfa, dom, precision, solver)
                    if isinstance(outcome, Verdict):
                        return finish(outcome)
                    precision, refined = outcome
                    stats.refinements += refined
                    if node.id in arg.nodes:
                        arg.push(node.id)
                    break
                for other in arg.by_location[e.target]:
                    o = arg.nodes[other]
                    if other != child.id and o.covering is None and dom.is_covered(succ, o.state, e.target):
                        arg.cover(child, o)
                        break
                else:
                    arg.push(child.id)
    except SolverBudgetExceeded as exc:
        return finish(Verdict(RESOURCE_OUT, reason=f"solver budget exhausted: {exc}"))
    except (explicit.RefinementError, predicate.RefinementError) as exc:
        return finish(Verdict(RESOURCE_OUT, reason=f"refinement failed: {exc}"))
    return finish(Verdict(SAFE))


def _first_difference(stored: list, replayed: list) -> int:
    for i, s in enumerate(stored):
        if i >= len(replayed) or replayed[i] != s:
            return i
    return len(stored)


def _handle_error(arg: Arg, child: ArgNode, cfa: Cfa, dom, precision: ProgramPrecision, solver: Solver):
    nodes = arg.path_to(child.id)
    path = [n.edge for n in nodes[1:]]
    cex = check_feasibility(path, solver)
    if cex is not None:
        return Verdict(UNSAFE, cex)
    stored = [n.state for n in nodes]
    replayed = dom.replay(path, precision)
    refined = 0
    if replayed[-1] is not None and len(replayed) == len(stored):
        increment = dom.refine(path, precision)
        precision = precision | increment
        refined = 1
        replayed = dom.replay(path, precision)
        if replayed[-1] is not None and len(replayed) == len(stored):
            return Verdict(RESOURCE_OUT, reason="refinement made no progress")
    pivot = _first_difference(stored, replayed)
    if pivot >= len(nodes):
        return Verdict(RESOURCE_OUT, reason="refinement made no progress")
    lazy_prune(arg, nodes[pivot].id)
    return precision, refined


# ------------------------------------------------------------------ dumping


def dump_locations(precision: ProgramPrecision, cfa: Cfa) -> list[int]:
    """Locations whose precision is worth storing for this domain."""
    if precision.kind == PREDICATE:
        return sorted(l for l in cfa.locations if predicate.is_block_end(l, cfa))
    return sorted(cfa.locations)


def dump_form(precision: ProgramPrecision, cfa: Cfa) -> ProgramPrecision:
    """The stored layers plus the effective precision of every relevant location.

    Location entries make location-scoped reuse possible; the function layer
    gets the union of its locations.
    """
    out = precision
    for loc in dump_locations(precision, cfa):
        eff = precision.at(loc, cfa.locations[loc])
        if eff:
            out = out.with_location(loc, eff).with_function(cfa.locations[loc], eff)
    return out


def dump_final_precision(run: RunResult) -> bytes:
    data = write_precision_file(run.final)
    run.stats.precision_bytes_out = len(data)
    return data
