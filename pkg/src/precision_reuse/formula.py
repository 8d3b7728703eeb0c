"""Quantifier-free linear integer arithmetic formulas.

Atoms are kept in a canonical form over the integers:

* every comparison is rewritten to ``sum(c_i * x_i) <= k`` or ``sum(c_i * x_i) = k``
  (strict comparisons use ``<= k - 1``, ``>=`` flips signs, ``!=`` becomes ``not (=)``),
* coefficients are divided by their gcd (bounds of ``<=`` are floored),
* ``=`` atoms have a positive leading coefficient,
* variable-free atoms fold to ``TRUE``/``FALSE``.

Formulas are immutable and hashable, so they can be used as dictionary keys
and in sets of predicates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import gcd
from typing import Iterable, Mapping

LE = "<="
EQ = "="


class NonlinearError(ValueError):
    """Raised when an arithmetic operation would leave linear arithmetic."""


@dataclass(frozen=True)
class LinExpr:
    """``sum(coeff * var) + const`` with integer coefficients."""

    coeffs: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(coeffs: Mapping[str, int] | Iterable[tuple[str, int]] = (), const: int = 0) -> "LinExpr":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[str, int] = {}
        for v, c in items:
            acc[v] = acc.get(v, 0) + c
        return LinExpr(tuple(sorted((v, c) for v, c in acc.items() if c)), const)

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr(((name, 1),), 0)

    @staticmethod
    def constant(value: int) -> "LinExpr":
        return LinExpr((), value)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def __add__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.coeffs, self.const + other)
        return LinExpr.of(self.coeffs + other.coeffs, self.const + other.const)

    def __neg__(self) -> "LinExpr":
        return LinExpr(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return self + (-other)
        return self + (-other)

    def scale(self, k: int) -> "LinExpr":
        if k == 0:
            return LinExpr()
        return LinExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def __mul__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return self.scale(other)
        if other.is_constant():
            return self.scale(other.const)
        if self.is_constant():
            return other.scale(self.const)
        raise NonlinearError(f"nonlinear product ({self}) * ({other})")

    def substitute(self, mapping: Mapping[str, "LinExpr"]) -> "LinExpr":
        out = LinExpr.constant(self.const)
        for v, c in self.coeffs:
            repl = mapping.get(v)
            out = out + (repl.scale(c) if repl is not None else LinExpr(((v, c),), 0))
        return out

    def rename(self, mapping: Mapping[str, str]) -> "LinExpr":
        return LinExpr.of(((mapping.get(v, v), c) for v, c in self.coeffs), self.const)

    def evaluate(self, env: Mapping[str, int]) -> int:
        return self.const + sum(c * env[v] for v, c in self.coeffs)

    def evaluate_partial(self, env: Mapping[str, int]) -> int | None:
        total = self.const
        for v, c in self.coeffs:
            val = env.get(v)
            if val is None:
                return None
            total += c * val
        return total

    def __str__(self) -> str:
        parts: list[str] = []
        for v, c in self.coeffs:
            if c == 1:
                term = v
            elif c == -1:
                term = f"-{v}"
            else:
                term = f"{c}*{v}"
            parts.append(term)
        if self.const or not parts:
            parts.append(str(self.const))
        text = " + ".join(parts)
        return text.replace("+ -", "- ")


class Formula:
    """Base class of the formula tree."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class Atom(Formula):
    """Canonical linear constraint ``sum(coeffs) op bound``."""

    coeffs: tuple[tuple[str, int], ...]
    op: str
    bound: int

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    @property
    def lhs(self) -> LinExpr:
        return LinExpr(self.coeffs, 0)

    def __str__(self) -> str:
        if self.op == LE and all(c < 0 for _, c in self.coeffs):
            flipped = LinExpr(tuple((v, -c) for v, c in self.coeffs), 0)
            return f"{flipped} >= {-self.bound}"
        op = "<=" if self.op == LE else "=="
        return f"{LinExpr(self.coeffs, 0)} {op} {self.bound}"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self) -> str:
        return f"!({self.arg})"


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __str__(self) -> str:
        return "(" + " && ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __str__(self) -> str:
        return "(" + " || ".join(map(str, self.args)) + ")"


# --------------------------------------------------------------------------
# construction


def _gcd_all(values: Iterable[int]) -> int:
    return reduce(gcd, (abs(v) for v in values), 0)


def make_atom(expr: LinExpr, op: str) -> Formula:
    """Build ``expr op 0`` in canonical form; ``op`` is one of ``<= < >= > == !=``."""
    if op in ("==", "="):
        return _canonical(expr.coeffs, EQ, -expr.const)
    if op == "!=":
        return neg(_canonical(expr.coeffs, EQ, -expr.const))
    if op == "<=":
        return _canonical(expr.coeffs, LE, -expr.const)
    if op == "<":
        return _canonical(expr.coeffs, LE, -expr.const - 1)
    if op == ">=":
        n = -expr
        return _canonical(n.coeffs, LE, -n.const)
    if op == ">":
        n = -expr
        return _canonical(n.coeffs, LE, -n.const - 1)
    raise ValueError(f"unknown comparison {op!r}")


def compare(lhs: LinExpr, op: str, rhs: LinExpr | int) -> Formula:
    if isinstance(rhs, int):
        rhs = LinExpr.constant(rhs)
    return make_atom(lhs - rhs, op)


def _canonical(coeffs: tuple[tuple[str, int], ...], op: str, bound: int) -> Formula:
    coeffs = tuple(sorted((v, c) for v, c in coeffs if c))
    if not coeffs:
        holds = 0 <= bound if op == LE else bound == 0
        return TRUE if holds else FALSE
    g = _gcd_all(c for _, c in coeffs)
    if op == EQ:
        if bound % g:
            return FALSE
        coeffs = tuple((v, c // g) for v, c in coeffs)
        bound //= g
        if coeffs[0][1] < 0:
            coeffs = tuple((v, -c) for v, c in coeffs)
            bound = -bound
    else:
        coeffs = tuple((v, c // g) for v, c in coeffs)
        bound = bound // g  # floor division tightens over the integers
    return Atom(coeffs, op, bound)


def complement(atom: Atom) -> Atom:
    """The integer negation of a ``<=`` atom: ``not (t <= k)`` is ``-t <= -k-1``."""
    assert atom.op == LE
    return Atom(tuple((v, -c) for v, c in atom.coeffs), LE, -atom.bound - 1)


def predicate_key(atom: Atom) -> Atom:
    """Representative of ``{a, not a}``; used to identify predicates."""
    if atom.op == LE and atom.coeffs[0][1] < 0:
        return complement(atom)
    return atom


def _flatten(kind: type, args: Iterable[Formula]) -> list[Formula]:
    out: list[Formula] = []
    seen: set[Formula] = set()
    for a in args:
        items = a.args if isinstance(a, kind) else (a,)
        for item in items:
            if item not in seen:
                seen.add(item)
                out.append(item)
    return out


def conj(*args: Formula) -> Formula:
    parts = []
    for a in _flatten(And, args):
        if a == FALSE:
            return FALSE
        if a != TRUE:
            parts.append(a)
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


def disj(*args: Formula) -> Formula:
    parts = []
    for a in _flatten(Or, args):
        if a == TRUE:
            return TRUE
        if a != FALSE:
            parts.append(a)
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return Or(tuple(parts))


def neg(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    if isinstance(f, Atom) and f.op == LE:
        return complement(f)
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def conj_all(args: Iterable[Formula]) -> Formula:
    return conj(*args)


def disj_all(args: Iterable[Formula]) -> Formula:
    return disj(*args)


# --------------------------------------------------------------------------
# traversal


def variables(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return f.variables
    if isinstance(f, Not):
        return variables(f.arg)
    if isinstance(f, (And, Or)):
        return frozenset().union(*(variables(a) for a in f.args))
    return frozenset()


def atoms(f: Formula) -> frozenset[Atom]:
    """Canonical atoms occurring in ``f`` (each identified with its complement)."""
    if isinstance(f, Atom):
        return frozenset({predicate_key(f)})
    if isinstance(f, Not):
        return atoms(f.arg)
    if isinstance(f, (And, Or)):
        return frozenset().union(*(atoms(a) for a in f.args))
    return frozenset()


def substitute(f: Formula, mapping: Mapping[str, LinExpr]) -> Formula:
    """Replace variables by linear expressions and re-canonicalize."""
    if isinstance(f, Atom):
        if not (f.variables & mapping.keys()):
            return f
        expr = f.lhs.substitute(mapping)
        return _canonical(expr.coeffs, f.op, f.bound - expr.const)
    if isinstance(f, Not):
        return neg(substitute(f.arg, mapping))
    if isinstance(f, And):
        return conj(*(substitute(a, mapping) for a in f.args))
    if isinstance(f, Or):
        return disj(*(substitute(a, mapping) for a in f.args))
    return f


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    if not mapping:
        return f
    return substitute(f, {k: LinExpr.var(v) for k, v in mapping.items()})


def evaluate(f: Formula, env: Mapping[str, int]) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Atom):
        value = f.lhs.evaluate(env)
        return value <= f.bound if f.op == LE else value == f.bound
    if isinstance(f, Not):
        return not evaluate(f.arg, env)
    if isinstance(f, And):
        return all(evaluate(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, env) for a in f.args)
    raise TypeError(f)


def evaluate_partial(f: Formula, env: Mapping[str, int]) -> bool | None:
    """Kleene three-valued evaluation; ``None`` means unknown."""
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Atom):
        value = f.lhs.evaluate_partial(env)
        if value is None:
            return None
        return value <= f.bound if f.op == LE else value == f.bound
    if isinstance(f, Not):
        inner = evaluate_partial(f.arg, env)
        return None if inner is None else not inner
    if isinstance(f, And):
        result: bool | None = True
        for a in f.args:
            r = evaluate_partial(a, env)
            if r is False:
                return False
            if r is None:
                result = None
        return result
    if isinstance(f, Or):
        result = False
        for a in f.args:
            r = evaluate_partial(a, env)
            if r is True:
                return True
            if r is None:
                result = None
        return result
    raise TypeError(f)


def to_nnf(f: Formula) -> Formula:
    """Negation normal form without ``Not``: negated equalities become two ``<=`` atoms."""
    if isinstance(f, (BoolConst, Atom)):
        return f
    if isinstance(f, And):
        return conj(*(to_nnf(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(to_nnf(a) for a in f.args))
    assert isinstance(f, Not)
    g = f.arg
    if isinstance(g, BoolConst):
        return neg(g)
    if isinstance(g, Atom):
        if g.op == LE:
            return complement(g)
        lhs = g.lhs
        return disj(_canonical(lhs.coeffs, LE, g.bound - 1), _canonical((-lhs).coeffs, LE, -g.bound - 1))
    if isinstance(g, Not):
        return to_nnf(g.arg)
    if isinstance(g, And):
        return disj(*(to_nnf(Not(a)) for a in g.args))
    if isinstance(g, Or):
        return conj(*(to_nnf(Not(a)) for a in g.args))
    raise TypeError(g)


def size(f: Formula) -> int:
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    if isinstance(f, Not):
        return 1 + size(f.arg)
    return 1
