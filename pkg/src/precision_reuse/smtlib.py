"""A small SMT-LIB2 subset for storing linear predicates.

Supported commands are ``declare-fun`` for nullary ``Int``/``Real`` symbols,
``define-fun`` for nullary ``Bool`` abbreviations, and ``assert``.  Terms may
use ``= <= < >= > distinct not and or => + - *`` and integer literals.
Numerals written as decimals (``1.0``) are accepted when integral.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    EQ,
    FALSE,
    TRUE,
    Atom,
    Formula,
    LinExpr,
    conj_all,
    disj_all,
    implies,
    make_atom,
    neg,
)


class SmtError(ValueError):
    pass


_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\|[^|]*\|)|([^\s()|;]+)|(;[^\n]*))")


def _tokens(text: str) -> list[str]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SmtError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group(5):
            continue
        tok = next(g for g in m.groups()[:4] if g is not None)
        out.append(tok)
    return out


def parse_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    for tok in _tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SmtError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SmtError("unbalanced '('")
    return stack[0]


def _symbol(tok) -> str:
    if not isinstance(tok, str):
        raise SmtError(f"expected a symbol, got {tok!r}")
    if tok.startswith("|") and tok.endswith("|"):
        return tok[1:-1]
    return tok


def _numeral(tok: str) -> int | None:
    try:
        value = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None
    if value.denominator != 1:
        raise SmtError(f"non-integral constant {tok}")
    return int(value)


@dataclass
class SmtDefinitions:
    declarations: dict[str, str] = field(default_factory=dict)
    definitions: dict[str, Formula] = field(default_factory=dict)
    assertions: list[Formula] = field(default_factory=list)


class _TermReader:
    def __init__(self, defs: SmtDefinitions):
        self.defs = defs

    def term(self, t) -> LinExpr:
        if isinstance(t, str):
            if not t.startswith("|"):
                n = _numeral(t)
                if n is not None:
                    return LinExpr.constant(n)
            name = _symbol(t)
            if name not in self.defs.declarations:
                raise SmtError(f"undeclared symbol {name!r}")
            return LinExpr.var(name)
        if not t:
            raise SmtError("empty term")
        head, args = t[0], t[1:]
        if head == "+":
            total = LinExpr.constant(0)
            for a in args:
                total = total + self.term(a)
            return total
        if head == "-":
            if len(args) == 1:
                return -self.term(args[0])
            total = self.term(args[0])
            for a in args[1:]:
                total = total - self.term(a)
            return total
        if head == "*":
            total = self.term(args[0])
            for a in args[1:]:
                total = total * self.term(a)
            return total
        raise SmtError(f"unsupported arithmetic operator {head!r}")

    def formula(self, t) -> Formula:
        if isinstance(t, str):
            if t == "true":
                return TRUE
            if t == "false":
                return FALSE
            name = _symbol(t)
            if name in self.defs.definitions:
                return self.defs.definitions[name]
            raise SmtError(f"unknown Boolean symbol {name!r}")
        if not t:
            raise SmtError("empty formula")
        head, args = t[0], t[1:]
        if head == "not":
            return neg(self.formula(args[0]))
        if head == "and":
            return conj_all(self.formula(a) for a in args)
        if head == "or":
            return disj_all(self.formula(a) for a in args)
        if head == "=>":
            return implies(self.formula(args[0]), self.formula(args[1]))
        ops = {"=": "==", "<=": "<=", "<": "<", ">=": ">=", ">": ">", "distinct": "!="}
        if head in ops:
            if len(args) != 2:
                raise SmtError(f"{head} expects two arguments")
            return make_atom(self.term(args[0]) - self.term(args[1]), ops[head])
        raise SmtError(f"unsupported Boolean operator {head!r}")


def parse_smt_subset(text: str, defs: SmtDefinitions | None = None) -> SmtDefinitions:
    """Read declarations, definitions and assertions into ``defs``."""
    defs = defs if defs is not None else SmtDefinitions()
    reader = _TermReader(defs)
    for cmd in parse_sexprs(text):
        if not isinstance(cmd, list) or not cmd:
            raise SmtError(f"expected a command, got {cmd!r}")
        head = cmd[0]
        if head == "declare-fun":
            if len(cmd) != 4 or cmd[2] != []:
                raise SmtError("only nullary declare-fun is supported")
            if cmd[3] not in ("Int", "Real"):
                raise SmtError(f"unsupported sort {cmd[3]!r}")
            defs.declarations[_symbol(cmd[1])] = cmd[3]
        elif head == "define-fun":
            if len(cmd) != 5 or cmd[2] != [] or cmd[3] != "Bool":
                raise SmtError("only nullary Bool define-fun is supported")
            defs.definitions[_symbol(cmd[1])] = reader.formula(cmd[4])
        elif head == "assert":
            if len(cmd) != 2:
                raise SmtError("assert expects one argument")
            defs.assertions.append(reader.formula(cmd[1]))
        else:
            raise SmtError(f"unsupported command {head!r}")
    return defs


def quote(name: str) -> str:
    return f"|{name}|"


def _render_coeff(c: int) -> str:
    return str(c) if c >= 0 else f"(- {-c})"


def render_atom(atom: Atom) -> str:
    terms = []
    for v, c in atom.coeffs:
        terms.append(quote(v) if c == 1 else f"(* {_render_coeff(c)} {quote(v)})")
    lhs = terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"
    op = "=" if atom.op == EQ else "<="
    return f"({op} {lhs} {_render_coeff(atom.bound)})"


def render_smt_subset(variables, predicates: dict[str, Atom], sort: str = "Int") -> str:
    """Declarations followed by one ``define-fun`` per named predicate."""
    lines = [f"(declare-fun {quote(v)}() {sort})" for v in sorted(variables)]
    lines += [f"(define-fun {name}() Bool {render_atom(a)})" for name, a in predicates.items()]
    return "\n".join(lines)
