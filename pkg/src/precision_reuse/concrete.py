"""Exhaustive concrete exploration, used as a ground-truth oracle in tests.

Inputs and uninitialized variables range over a small box.  A program is
only judged if every value it can compute stays inside that box; otherwise
the oracle declines to answer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .cfa import AssignOp, AssumeOp, Cfa, HavocOp, op_variables
from .formula import evaluate

BOX = (-8, 8)


@dataclass
class OracleResult:
    verdict: str | None  # "safe", "unsafe", or None when the program is out of scope
    states: int
    reason: str = ""


def explore(cfa: Cfa, box: tuple[int, int] = BOX, max_states: int = 2_000_000) -> OracleResult:
    lo, hi = box
    domain = range(lo, hi + 1)
    start = (cfa.entry, ())
    seen = {start}
    queue = deque([start])

    def push(loc: int, env: dict[str, int]) -> None:
        key = (loc, tuple(sorted(env.items())))
        if key not in seen:
            seen.add(key)
            queue.append(key)

    while queue:
        if len(seen) > max_states:
            return OracleResult(None, len(seen), "state space too large")
        loc, items = queue.popleft()
        if cfa.is_error(loc):
            return OracleResult("unsafe", len(seen))
        env0 = dict(items)
        for e in cfa.out_edges(loc):
            op = e.op
            reads = op_variables(op) if isinstance(op, AssumeOp) else op.expr.variables if isinstance(op, AssignOp) else ()
            missing = sorted(v for v in reads if v not in env0)
            envs = [env0]
            for v in missing:
                envs = [dict(env, **{v: k}) for env in envs for k in domain]
            for env in envs:
                if isinstance(op, AssignOp):
                    val = op.expr.evaluate(env)
                    if not lo <= val <= hi:
                        return OracleResult(None, len(seen), f"{op.var} leaves the box at line {e.line}")
                    push(e.target, dict(env, **{op.var: val}))
                elif isinstance(op, HavocOp):
                    for k in domain:
                        push(e.target, dict(env, **{op.var: k}))
                elif isinstance(op, AssumeOp):
                    if evaluate(op.cond, env):
                        push(e.target, env)
                else:
                    push(e.target, env)
    return OracleResult("safe", len(seen))
