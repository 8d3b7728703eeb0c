"""Control-flow automata built from MiniImp ASTs.

Calls are inlined; every inlined location keeps the name of the function it
was declared in, so function-scoped precisions still apply to it.  Locations
are numbered by a depth-first pre-order walk starting at 1 from the entry of
``main``.  Call edges are not followed during the walk of the caller; the
inlined bodies are numbered afterwards, callees in declaration order.  As a
consequence, inserting a statement only renumbers locations that come after
it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

from .formula import TRUE, Formula, LinExpr, neg, variables as formula_variables
from .minimp import (
    Assert,
    Assign,
    Assume,
    Ast,
    Block,
    Call,
    Declare,
    Error,
    If,
    Input,
    Nondet,
    ParseError,
    Stmt,
    While,
    check_acyclic,
    declared_variables,
)


@dataclass(frozen=True)
class AssignOp:
    var: str
    expr: LinExpr

    def __str__(self) -> str:
        return f"{self.var} := {self.expr}"


@dataclass(frozen=True)
class HavocOp:
    var: str

    def __str__(self) -> str:
        return f"{self.var} := input()"


@dataclass(frozen=True)
class AssumeOp:
    cond: Formula

    def __str__(self) -> str:
        return f"[{self.cond}]"


@dataclass(frozen=True)
class CallOp:
    function: str

    def __str__(self) -> str:
        return f"call {self.function}"


@dataclass(frozen=True)
class ReturnOp:
    function: str

    def __str__(self) -> str:
        return f"return from {self.function}"


@dataclass(frozen=True)
class SkipOp:
    label: str = ""

    def __str__(self) -> str:
        return self.label or "skip"


Op = Union[AssignOp, HavocOp, AssumeOp, CallOp, ReturnOp, SkipOp]


@dataclass(frozen=True)
class CfaEdge:
    source: int
    target: int
    op: Op
    line: int = 0

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}: {self.op}"


def op_variables(op: Op) -> frozenset[str]:
    if isinstance(op, AssignOp):
        return frozenset({op.var}) | op.expr.variables
    if isinstance(op, HavocOp):
        return frozenset({op.var})
    if isinstance(op, AssumeOp):
        return formula_variables(op.cond)
    return frozenset()


@dataclass(frozen=True)
class Cfa:
    name: str
    locations: dict[int, str]  # location -> declared function name
    edges: tuple[CfaEdge, ...]
    functions: dict[str, tuple[tuple[int, int | None], ...]]  # entry/exit of every inlined copy
    variables: frozenset[str]
    error_locations: frozenset[int]
    loop_heads: frozenset[int]
    entry: int = 1
    exit: int | None = None
    function_order: tuple[str, ...] = field(default=())

    def __hash__(self) -> int:
        return hash((self.name, self.edges))

    @cached_property
    def _out(self) -> dict[int, tuple[CfaEdge, ...]]:
        out: dict[int, list[CfaEdge]] = defaultdict(list)
        for e in self.edges:
            out[e.source].append(e)
        return {k: tuple(v) for k, v in out.items()}

    def out_edges(self, loc: int) -> tuple[CfaEdge, ...]:
        return self._out.get(loc, ())

    def function_of(self, loc: int) -> str:
        return self.locations[loc]

    def locations_of(self, function: str) -> list[int]:
        return sorted(l for l, f in self.locations.items() if f == function)

    def is_error(self, loc: int) -> bool:
        return loc in self.error_locations


class _Builder:
    def __init__(self, ast: Ast):
        self.ast = ast
        self.funcs = {f.name: f for f in ast.functions}
        self.decl_index = {f.name: i for i, f in enumerate(ast.functions)}
        self.count = 0
        self.func_of: dict[int, str] = {}
        self.edges: list[list] = []  # [source, target, op, line]
        self.errors: set[int] = set()
        self.heads: set[int] = set()
        self.copies: list[list] = []  # [callee, entry, exit, call_source, return_site, seq]

    def new(self, func: str) -> int:
        self.count += 1
        self.func_of[self.count] = func
        return self.count

    def edge(self, src: int, dst: int, op: Op, line: int = 0) -> None:
        self.edges.append([src, dst, op, line])

    def merge(self, keep: int, drop: int) -> None:
        """Identify ``drop`` with ``keep``; ``drop`` has no outgoing edges yet."""
        for e in self.edges:
            if e[1] == drop:
                e[1] = keep
            if e[0] == drop:
                e[0] = keep
        for c in self.copies:
            for i in (1, 2, 4):
                if c[i] == drop:
                    c[i] = keep
        if drop in self.heads:
            self.heads.discard(drop)
            self.heads.add(keep)
        del self.func_of[drop]

    def stmt(self, s: Stmt, cur: int, func: str) -> int | None:
        if isinstance(s, Block):
            for inner in s.stmts:
                cur = self.stmt(inner, cur, func)
                if cur is None:
                    return None
            return cur
        if isinstance(s, Declare):
            if s.havoc:
                nxt = self.new(func)
                self.edge(cur, nxt, HavocOp(s.name), s.line)
                return nxt
            if s.init is not None:
                nxt = self.new(func)
                self.edge(cur, nxt, AssignOp(s.name, s.init), s.line)
                return nxt
            return cur
        if isinstance(s, Assign):
            nxt = self.new(func)
            self.edge(cur, nxt, AssignOp(s.var, s.expr), s.line)
            return nxt
        if isinstance(s, Input):
            nxt = self.new(func)
            self.edge(cur, nxt, HavocOp(s.var), s.line)
            return nxt
        if isinstance(s, Assume):
            nxt = self.new(func)
            self.edge(cur, nxt, AssumeOp(s.cond), s.line)
            return nxt
        if isinstance(s, Assert):
            return self.stmt(If(neg(s.cond), Error(s.line), None, s.line), cur, func)
        if isinstance(s, Error):
            err = self.new(func)
            self.edge(cur, err, SkipOp("error"), s.line)
            self.errors.add(err)
            return None
        if isinstance(s, If):
            pos, negc = (TRUE, TRUE) if isinstance(s.cond, Nondet) else (s.cond, neg(s.cond))
            then_start = self.new(func)
            self.edge(cur, then_start, AssumeOp(pos), s.line)
            then_end = self.stmt(s.then, then_start, func)
            else_start = self.new(func)
            self.edge(cur, else_start, AssumeOp(negc), s.line)
            else_end = self.stmt(s.orelse, else_start, func) if s.orelse is not None else else_start
            if then_end is None:
                return else_end
            if else_end is None:
                return then_end
            self.merge(then_end, else_end)
            return then_end
        if isinstance(s, While):
            pos, negc = (TRUE, TRUE) if isinstance(s.cond, Nondet) else (s.cond, neg(s.cond))
            head = cur
            self.heads.add(head)
            body_start = self.new(func)
            self.edge(head, body_start, AssumeOp(pos), s.line)
            body_end = self.stmt(s.body, body_start, func)
            if body_end is not None:
                self.merge(head, body_end)
            exit_loc = self.new(func)
            self.edge(head, exit_loc, AssumeOp(negc), s.line)
            return exit_loc
        if isinstance(s, Call):
            callee = self.funcs[s.name]
            entry = self.new(s.name)
            self.edge(cur, entry, CallOp(s.name), s.line)
            record = [s.name, entry, None, cur, None, len(self.copies)]
            self.copies.append(record)
            end = self.stmt(callee.body, entry, s.name)
            if end is None:
                return None
            ret = self.new(func)
            self.edge(end, ret, ReturnOp(s.name), s.line)
            record[2] = end
            record[4] = ret
            return ret
        raise TypeError(f"unsupported statement {s!r}")

    def build(self) -> Cfa:
        main = self.funcs["main"]
        entry = self.new("main")
        cur: int | None = entry
        for g in self.ast.globals:
            nxt = self.new("main")
            if g.havoc:
                self.edge(cur, nxt, HavocOp(g.name), g.line)
            else:
                self.edge(cur, nxt, AssignOp(g.name, g.init if g.init is not None else LinExpr.constant(0)), g.line)
            cur = nxt
        exit_loc = self.stmt(main.body, cur, "main")
        return self._renumber(entry, exit_loc)

    def _renumber(self, entry: int, exit_loc: int | None) -> Cfa:
        succ: dict[int, list[tuple[int, Op]]] = defaultdict(list)
        for src, dst, op, _ in self.edges:
            succ[src].append((dst, op))
        call_return = {(c[3], c[1]): c[4] for c in self.copies}
        numbers: dict[int, int] = {}
        pending: list[tuple[int, int, int]] = []  # (decl index, seq, entry)

        def walk(start: int) -> None:
            stack = [start]
            while stack:
                node = stack.pop()
                if node in numbers:
                    continue
                numbers[node] = len(numbers) + 1
                nxt = []
                for dst, op in succ[node]:
                    if isinstance(op, CallOp):
                        copy = next(c for c in self.copies if c[3] == node and c[1] == dst)
                        pending.append((self.decl_index[op.function], copy[5], dst))
                        ret = call_return[(node, dst)]
                        if ret is not None:
                            nxt.append(ret)
                    else:
                        nxt.append(dst)
                stack.extend(reversed(nxt))

        walk(entry)
        while pending:
            batch = sorted(pending)
            pending.clear()
            for _, _, start in batch:
                walk(start)

        # creation order is kept among edges leaving the same location
        ranked = sorted(
            ((numbers[s], i, CfaEdge(numbers[s], numbers[d], op, line)) for i, (s, d, op, line) in enumerate(self.edges)),
            key=lambda t: (t[0], t[1]),
        )
        edges = [e for _, _, e in ranked]
        functions: dict[str, list[tuple[int, int | None]]] = defaultdict(list)
        functions["main"].append((numbers[entry], numbers[exit_loc] if exit_loc is not None else None))
        for c in sorted(self.copies, key=lambda c: numbers[c[1]]):
            functions[c[0]].append((numbers[c[1]], numbers[c[2]] if c[2] is not None else None))
        return Cfa(
            name=self.ast.name,
            locations={numbers[l]: f for l, f in sorted(self.func_of.items(), key=lambda kv: numbers[kv[0]])},
            edges=tuple(edges),
            functions={k: tuple(v) for k, v in functions.items()},
            variables=frozenset(declared_variables(self.ast)),
            error_locations=frozenset(numbers[e] for e in self.errors),
            loop_heads=frozenset(numbers[h] for h in self.heads),
            entry=numbers[entry],
            exit=numbers[exit_loc] if exit_loc is not None else None,
            function_order=tuple(f.name for f in self.ast.functions),
        )


def build_cfa(ast: Ast) -> Cfa:
    """Build the control-flow automaton of a parsed program."""
    names = [f.name for f in ast.functions]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise ParseError(f"duplicate function(s): {', '.join(sorted(dupes))}")
    check_acyclic(ast)
    return _Builder(ast).build()
