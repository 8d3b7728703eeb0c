"""Path formulas in SSA form and weakest preconditions over CFA edges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .cfa import AssignOp, AssumeOp, CfaEdge, HavocOp, Op
from .formula import (
    EQ,
    FALSE,
    TRUE,
    Formula,
    LinExpr,
    conj_all,
    disj,
    make_atom,
    neg,
    rename,
    substitute,
    variables,
)

SSA_SEP = "#"
FRESH_SEP = "!"


def ssa_name(var: str, index: int) -> str:
    """Index 0 is the plain name, so formulas over program variables need no renaming."""
    return var if index == 0 else f"{var}{SSA_SEP}{index}"


def base_name(name: str) -> str:
    return name.split(SSA_SEP, 1)[0].split(FRESH_SEP, 1)[0]


def is_fresh(name: str) -> bool:
    return FRESH_SEP in name


@dataclass
class PathFormula:
    """Conjunction of per-edge constraints over SSA-indexed variables.

    ``conjuncts[i]`` encodes edge ``i``; ``indices[i]`` is the SSA map in force
    *before* edge ``i`` (``indices[len(edges)]`` is the final map).
    ``havocs`` maps the position of every havoc edge to the SSA name it
    introduces.
    """

    conjuncts: list[Formula]
    indices: list[dict[str, int]]
    havocs: dict[int, str] = field(default_factory=dict)

    @property
    def formula(self) -> Formula:
        return conj_all(self.conjuncts)

    def prefix(self, k: int) -> Formula:
        return conj_all(self.conjuncts[:k])

    def suffix(self, k: int) -> Formula:
        return conj_all(self.conjuncts[k:])

    def at(self, k: int) -> dict[str, str]:
        """Renaming from plain to SSA names at position ``k``."""
        return {v: ssa_name(v, i) for v, i in self.indices[k].items()}


def edge_constraint(op: Op, idx: dict[str, int]) -> tuple[Formula, dict[str, int], str | None]:
    """Constraint for one edge; returns (formula, new SSA map, havoc name)."""
    cur = lambda v: ssa_name(v, idx.get(v, 0))  # noqa: E731
    if isinstance(op, AssignOp):
        rhs = op.expr.rename({v: cur(v) for v in op.expr.variables})
        new = dict(idx)
        new[op.var] = idx.get(op.var, 0) + 1
        lhs = LinExpr.var(ssa_name(op.var, new[op.var]))
        return make_atom(lhs - rhs, EQ), new, None
    if isinstance(op, HavocOp):
        new = dict(idx)
        new[op.var] = idx.get(op.var, 0) + 1
        return TRUE, new, ssa_name(op.var, new[op.var])
    if isinstance(op, AssumeOp):
        return rename(op.cond, {v: cur(v) for v in variables(op.cond)}), idx, None
    return TRUE, idx, None


def path_formula(edges: Sequence[CfaEdge], start: dict[str, int] | None = None) -> PathFormula:
    idx = dict(start or {})
    conjuncts: list[Formula] = []
    indices = [idx]
    havocs: dict[int, str] = {}
    for k, e in enumerate(edges):
        f, idx, hv = edge_constraint(e.op, idx)
        conjuncts.append(f)
        indices.append(idx)
        if hv is not None:
            havocs[k] = hv
    return PathFormula(conjuncts, indices, havocs)


def weakest_precondition(op: Op, post: Formula, position: int = 0) -> Formula:
    """``wp(op, post)``.

    An assume contributes an implication.  A havoc replaces the variable by a
    fresh symbol tagged with ``position``; atoms mentioning such symbols never
    become predicates.
    """
    if isinstance(op, AssignOp):
        return substitute(post, {op.var: op.expr})
    if isinstance(op, HavocOp):
        return substitute(post, {op.var: LinExpr.var(f"{op.var}{FRESH_SEP}{position}")})
    if isinstance(op, AssumeOp):
        return disj(neg(op.cond), post)
    return post


def wp_chain(edges: Sequence[CfaEdge], post: Formula = FALSE) -> list[Formula]:
    """``chain[i]`` is the weakest precondition of ``post`` w.r.t. ``edges[i:]``."""
    chain = [post]
    for k in range(len(edges) - 1, -1, -1):
        chain.append(weakest_precondition(edges[k].op, chain[-1], k))
    chain.reverse()
    return chain
