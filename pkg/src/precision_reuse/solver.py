"""Decision procedure for quantifier-free linear integer arithmetic.

The boolean skeleton of a formula (in negation normal form) is encoded with a
polarity-aware Tseitin transformation and searched by conflict-driven clause
learning.  Every propagated partial assignment is checked by the theory solver: a
conjunction of integer constraints is decided by the Omega test: exact
elimination of equalities, exact projection of variables with unit
coefficients, and otherwise real shadow, dark shadow and splinters.  Theory
conflicts are shrunk to a small core and learned
as clauses.

All work is bounded by a node budget; exhausting it raises
:class:`SolverBudgetExceeded`, which callers must never read as ``unsat``.
"""

from __future__ import annotations

from math import gcd
from typing import Mapping

from .formula import (
    EQ,
    FALSE,
    LE,
    TRUE,
    And,
    Atom,
    BoolConst,
    Formula,
    Or,
    complement,
    conj,
    evaluate,
    neg,
    predicate_key,
    to_nnf,
    variables,
)

DEFAULT_NODE_BUDGET = 100_000
_FRESH = "$s"  # prefix of auxiliary variables; never a program name

Model = dict[str, int]
# (coefficients, op, bound) with op in {LE, EQ}
Constraint = tuple[tuple[tuple[str, int], ...], str, int]


class SolverBudgetExceeded(RuntimeError):
    """The node budget ran out before the query was decided."""


class _Budget:
    __slots__ = ("left", "fresh")

    def __init__(self, nodes: int):
        self.left = nodes
        self.fresh = 0

    def fresh_name(self) -> str:
        self.fresh += 1
        return f"{_FRESH}{self.fresh}"

    def tick(self, n: int = 1) -> None:
        self.left -= n
        if self.left < 0:
            raise SolverBudgetExceeded("solver node budget exhausted")


# --------------------------------------------------------------------------
# theory: conjunctions of integer constraints


def _normalize(coeffs: dict[str, int], op: str, bound: int) -> Constraint | bool:
    items = tuple(sorted((v, c) for v, c in coeffs.items() if c))
    if not items:
        return (0 <= bound) if op == LE else (bound == 0)
    g = 0
    for _, c in items:
        g = gcd(g, c)
    g = abs(g)
    if op == EQ:
        if bound % g:
            return False
        items = tuple((v, c // g) for v, c in items)
        return items, EQ, bound // g
    if g != 1:
        items = tuple((v, c // g) for v, c in items)
        bound = bound // g
    return items, LE, bound


def _substitute(con: Constraint, var: str, expr: dict[str, int], const: int) -> Constraint | bool:
    """Replace ``var`` by ``expr + const`` in ``con``."""
    coeffs, op, bound = con
    d = dict(coeffs)
    c = d.pop(var, 0)
    if not c:
        return con
    for v, k in expr.items():
        d[v] = d.get(v, 0) + c * k
    return _normalize(d, op, bound - c * const)


def _negate_key(key: tuple[tuple[str, int], ...]) -> tuple[tuple[str, int], ...]:
    return tuple((v, -c) for v, c in key)


def _eliminate_equalities(cons: list[Constraint], substitutions: list, budget: _Budget) -> list[Constraint] | None:
    """Substitute away every equality; ``None`` if the system is infeasible.

    A unit coefficient lets its variable be solved for directly.  Otherwise
    the variable with the smallest coefficient c is rewritten as
    ``x = s - sum((a // c) * y)`` with a fresh integer ``s``; that leaves only
    remainders modulo c on the other variables, so the smallest coefficient
    shrinks until it becomes a unit.  Substitutions are appended in order.
    """
    while True:
        eqs = [(i, con) for i, con in enumerate(cons) if con[1] == EQ]
        if not eqs:
            return cons
        unit = next(((i, v, c) for i, (coeffs, _, _) in eqs for v, c in coeffs if c in (1, -1)), None)
        if unit is not None:
            i, var, c = unit
            coeffs, _, bound = cons.pop(i)
            # c*var + rest = bound  =>  var = (bound - rest) / c
            expr = {v: -k * c for v, k in coeffs if v != var}
            const = bound * c
        else:
            i, (coeffs, _, _) = eqs[0]
            var, c = min(coeffs, key=lambda vc: (abs(vc[1]), vc[0]))
            expr = {budget.fresh_name(): 1}
            for v, k in coeffs:
                if v != var and k // c:
                    expr[v] = -(k // c)
            const = 0
        substitutions.append((var, expr, const))
        nxt: list[Constraint] = []
        for con in cons:
            n = _substitute(con, var, expr, const)
            if n is False:
                return None
            if n is not True:
                nxt.append(n)
        cons = nxt
        budget.tick()


def _omega(cons: list[Constraint], budget: _Budget) -> Model | None:
    """Integer feasibility of a conjunction (the Omega test).

    Equalities, including those implied by two opposite inequalities, are
    eliminated exactly; the remaining inequalities go to
    :func:`_project`.
    """
    budget.tick()
    substitutions: list[tuple[str, dict[str, int], int]] = []
    while True:
        cons = _eliminate_equalities(cons, substitutions, budget)
        if cons is None:
            return None
        rows: dict[tuple[tuple[str, int], ...], int] = {}
        for coeffs, _, bound in cons:
            rows[coeffs] = min(bound, rows.get(coeffs, bound))
        implied = None
        for key, bound in rows.items():
            opposite = rows.get(_negate_key(key))
            if opposite is not None:
                if opposite + bound < 0:
                    return None
                if opposite + bound == 0:
                    implied = (key, EQ, bound)
                    break
        if implied is None:
            break
        cons = [(k, LE, b) for k, b in rows.items()] + [implied]
    model = _project(rows, budget)
    if model is None:
        return None
    for var, expr, const in reversed(substitutions):
        model[var] = const + sum(k * model.get(v, 0) for v, k in expr.items())
    return model


def _combine(upper: list, lower: list, var: str, dark: bool) -> list[Constraint] | None:
    """Real (or dark) shadow of the bounds on ``var``; ``None`` if trivially infeasible."""
    out: list[Constraint] = []
    for du, bu in upper:
        a = du[var]
        for dl, bl in lower:
            b = -dl[var]
            combo: dict[str, int] = {}
            for v, k in du.items():
                combo[v] = combo.get(v, 0) + k * b
            for v, k in dl.items():
                combo[v] = combo.get(v, 0) + k * a
            combo.pop(var, None)
            bound = bu * b + bl * a - ((a - 1) * (b - 1) if dark else 0)
            n = _normalize(combo, LE, bound)
            if n is False:
                return None
            if n is not True:
                out.append(n)
    return out


def _extend(model: Model, var: str, rows: list[tuple[dict[str, int], int]]) -> Model:
    """Give ``var`` the value closest to 0 allowed by ``rows`` under ``model``."""
    lo = hi = None
    for d, bound in rows:
        for v in d:
            if v != var:
                model.setdefault(v, 0)
        c = d[var]
        rest = bound - sum(k * model[v] for v, k in d.items() if v != var)
        if c > 0:
            limit = rest // c
            hi = limit if hi is None else min(hi, limit)
        else:
            limit = -(rest // -c)
            lo = limit if lo is None else max(lo, limit)
    value = 0
    if lo is not None and value < lo:
        value = lo
    if hi is not None and value > hi:
        value = hi
    assert (lo is None or lo <= value) and (hi is None or value <= hi), "shadow guarantee violated"
    model[var] = value
    return model


def _project(ineqs: dict[tuple[tuple[str, int], ...], int], budget: _Budget) -> Model | None:
    """Integer feasibility of ``coeffs <= bound`` rows without equalities."""
    budget.tick()
    rows = [(dict(k), b) for k, b in ineqs.items()]
    if not rows:
        return {}
    bounds: dict[str, tuple[list[int], list[int]]] = {}
    for d, _ in rows:
        for v, c in d.items():
            up, lo = bounds.setdefault(v, ([], []))
            (up if c > 0 else lo).append(abs(c))

    def rank(v: str):
        up, lo = bounds[v]
        exact = all(c == 1 for c in up) or all(c == 1 for c in lo)
        return (bool(up) and bool(lo), not exact, len(up) * len(lo), v)

    var = min(bounds, key=rank)
    upper = [(d, b) for d, b in rows if d.get(var, 0) > 0]
    lower = [(d, b) for d, b in rows if d.get(var, 0) < 0]
    others = [(tuple(sorted(d.items())), LE, b) for d, b in rows if var not in d]
    one_sided, inexact = rank(var)[0] is False, rank(var)[1]

    def finish(sub: list[Constraint] | None) -> Model | None:
        if sub is None:
            return None
        m = _omega(others + sub, budget)
        return None if m is None else _extend(m, var, upper + lower)

    if one_sided:
        # var can always be pushed far enough; its rows constrain nothing else
        return finish([])
    real = _combine(upper, lower, var, dark=False)
    if not inexact:
        return finish(real)
    if real is None or _omega(others + real, budget) is None:
        return None
    found = finish(_combine(upper, lower, var, dark=True))
    if found is not None:
        return found
    # splinters: an integer point outside the dark shadow lies close to a lower bound
    a_max = max(d[var] for d, _ in upper)
    all_rows = [(tuple(sorted(d.items())), LE, b) for d, b in rows]
    for dl, bl in lower:
        b = -dl[var]
        key = tuple(sorted((v, -k) for v, k in dl.items()))
        for j in range((a_max * b - a_max - b) // a_max + 1):
            # b*var - rest = -bl + j, i.e. var sits j above this lower bound
            m = _omega(all_rows + [(key, EQ, -bl + j)], budget)
            if m is not None:
                return m
    return None


def solve_conjunction(constraints: list[Constraint], budget: _Budget | None = None) -> Model | None:
    """Integer feasibility of a conjunction of constraints."""
    budget = budget or _Budget(DEFAULT_NODE_BUDGET)
    cons: list[Constraint] = []
    for c in constraints:
        n = _normalize(dict(c[0]), c[1], c[2])
        if n is False:
            return None
        if n is not True:
            cons.append(n)
    model = _omega(cons, budget)
    if model is None:
        return None
    return {v: x for v, x in model.items() if not v.startswith(_FRESH)}


# --------------------------------------------------------------------------
# boolean layer


class _Encoding:
    def __init__(self) -> None:
        self.atom_var: dict[Atom, int] = {}
        self.var_atom: dict[int, Atom] = {}
        self.clauses: list[list[int]] = []
        self.nvars = 0

    def fresh(self) -> int:
        self.nvars += 1
        return self.nvars

    def literal(self, atom: Atom) -> int:
        key = predicate_key(atom)
        v = self.atom_var.get(key)
        if v is None:
            v = self.fresh()
            self.atom_var[key] = v
            self.var_atom[v] = key
        return v if key == atom else -v

    def encode(self, f: Formula) -> int:
        if isinstance(f, Atom):
            return self.literal(f)
        t = self.fresh()
        if isinstance(f, And):
            for a in f.args:
                self.clauses.append([-t, self.encode(a)])
        elif isinstance(f, Or):
            self.clauses.append([-t] + [self.encode(a) for a in f.args])
        else:
            raise TypeError(f)
        return t

    def add_top(self, f: Formula) -> None:
        if isinstance(f, And):
            for a in f.args:
                self.add_top(a)
        elif isinstance(f, Or):
            self.clauses.append([self.encode(a) for a in f.args])
        else:
            self.clauses.append([self.encode(f)])


def _theory_constraint(atom: Atom, positive: bool) -> Constraint | None:
    if positive:
        return atom.coeffs, atom.op, atom.bound
    if atom.op == LE:
        c = complement(atom)
        return c.coeffs, LE, c.bound
    return None  # a false equality only occurs positively in NNF


class _Cdcl:
    """Conflict-driven clause learning over the encoded skeleton.

    Propagation uses two watched literals.  Decisions follow the original
    clauses: the search picks a literal of the first clause that is not yet
    satisfied, so atoms irrelevant to the current branch stay unassigned.
    Whenever propagation settles, the assigned atoms are handed to the theory
    solver; an inconsistent set is shrunk to a core whose negation is learned
    and analysed like any other conflict (first unique implication point,
    non-chronological backjumping).
    """

    def __init__(self, enc: _Encoding, budget: _Budget):
        self.enc = enc
        self.budget = budget
        self.clauses: list[list[int]] = []
        self.n_original = 0
        self.watches: dict[int, list[int]] = {}
        self.value: dict[int, bool] = {}
        self.level: dict[int, int] = {}
        self.reason: dict[int, int | None] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.activity: dict[int, float] = {}
        self.theory_cache: dict[frozenset[int], Model | None] = {}

    # -- assignment

    def lit_value(self, lit: int) -> bool | None:
        v = self.value.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def enqueue(self, lit: int, reason: int | None) -> None:
        self.value[abs(lit)] = lit > 0
        self.level[abs(lit)] = len(self.trail_lim)
        self.reason[abs(lit)] = reason
        self.trail.append(lit)

    def backtrack(self, level: int) -> None:
        if len(self.trail_lim) <= level:
            return
        mark = self.trail_lim[level]
        for lit in self.trail[mark:]:
            v = abs(lit)
            del self.value[v]
            del self.level[v]
            del self.reason[v]
        del self.trail[mark:]
        del self.trail_lim[level:]
        self.qhead = min(self.qhead, mark)

    # -- clauses

    def watch(self, ci: int) -> None:
        c = self.clauses[ci]
        self.watches.setdefault(c[0], []).append(ci)
        self.watches.setdefault(c[1], []).append(ci)

    def add_clause(self, lits: list[int]) -> bool:
        """Add an original clause at level 0; False if it makes the problem unsat."""
        clause = list(dict.fromkeys(lits))
        if any(-l in clause for l in clause):
            return True
        if not clause:
            return False
        self.clauses.append(clause)
        ci = len(self.clauses) - 1
        if len(clause) == 1:
            val = self.lit_value(clause[0])
            if val is False:
                return False
            if val is None:
                self.enqueue(clause[0], ci)
            return True
        self.watch(ci)
        return True

    def add_learned(self, clause: list[int]) -> int:
        """Store a clause whose literals are all false; watch the two latest."""
        clause.sort(key=lambda l: -self.level.get(abs(l), -1))
        self.clauses.append(clause)
        ci = len(self.clauses) - 1
        if len(clause) >= 2:
            self.watch(ci)
        return ci

    def propagate(self) -> int | None:
        """Unit propagation; returns the index of a conflicting clause."""
        while self.qhead < len(self.trail):
            false_lit = -self.trail[self.qhead]
            self.qhead += 1
            watching = self.watches.get(false_lit, [])
            keep: list[int] = []
            for i, ci in enumerate(watching):
                c = self.clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                if self.lit_value(c[0]) is True:
                    keep.append(ci)
                    continue
                for k in range(2, len(c)):
                    if self.lit_value(c[k]) is not False:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(c[1], []).append(ci)
                        break
                else:
                    keep.append(ci)
                    if self.lit_value(c[0]) is False:
                        keep.extend(watching[i + 1 :])
                        self.watches[false_lit] = keep
                        return ci
                    self.enqueue(c[0], ci)
            self.watches[false_lit] = keep
        return None

    # -- conflicts

    def analyze(self, ci: int) -> bool:
        """Learn from conflicting clause ``ci`` and backjump; False means unsat."""
        clause = self.clauses[ci]
        top = max((self.level[abs(l)] for l in clause), default=0)
        if top == 0:
            return False
        self.backtrack(top)
        seen: set[int] = set()
        learnt: list[int] = []
        pending = 0
        idx = len(self.trail) - 1
        p: int | None = None
        while True:
            for q in clause:
                v = abs(q)
                if q == p or v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                self.activity[v] = self.activity.get(v, 0.0) + 1.0
                if self.level[v] == top:
                    pending += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            pending -= 1
            if pending == 0:
                break
            clause = self.clauses[self.reason[abs(p)]]
        learnt.insert(0, -p)
        back = max((self.level[abs(l)] for l in learnt[1:]), default=0)
        self.backtrack(back)
        self.clauses.append(learnt)
        li = len(self.clauses) - 1
        if len(learnt) >= 2:
            # learnt[1] must be a literal of the backjump level
            j = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
            learnt[1], learnt[j] = learnt[j], learnt[1]
            self.watch(li)
        self.enqueue(learnt[0], li)
        return True

    # -- theory

    def theory_check(self, lits: frozenset[int]) -> Model | None:
        if lits in self.theory_cache:
            return self.theory_cache[lits]
        cons = []
        for lit in lits:
            c = _theory_constraint(self.enc.var_atom[abs(lit)], lit > 0)
            if c is not None:
                cons.append(c)
        model = solve_conjunction(cons, self.budget)
        self.theory_cache[lits] = model
        return model

    def theory_core(self, lits: frozenset[int]) -> list[int]:
        core = set(lits)
        for lit in sorted(lits, key=lambda l: (-self.level[abs(l)], abs(l))):
            trial = frozenset(core - {lit})
            if self.theory_check(trial) is None:
                core.discard(lit)
        return [-lit for lit in core]

    # -- search

    def decide(self) -> int | None:
        for c in self.clauses[: self.n_original]:
            best = None
            for lit in c:
                val = self.lit_value(lit)
                if val is True:
                    best = None
                    break
                if val is None and (best is None or self.activity.get(abs(lit), 0.0) > self.activity.get(abs(best), 0.0)):
                    best = lit
            if best is not None:
                return best
        return None

    def run(self) -> Model | None:
        for clause in self.enc.clauses:
            if not self.add_clause(clause):
                return None
        self.n_original = len(self.clauses)
        atoms = self.enc.var_atom
        while True:
            self.budget.tick()
            conflict = self.propagate()
            if conflict is None:
                lits = frozenset(l for l in self.trail if abs(l) in atoms)
                model = self.theory_check(lits)
                if model is None:
                    conflict = self.add_learned(self.theory_core(lits))
            if conflict is not None:
                if not self.analyze(conflict):
                    return None
                continue
            lit = self.decide()
            if lit is None:
                return model
            self.trail_lim.append(len(self.trail))
            self.enqueue(lit, None)


def _complete(model: Model, f: Formula) -> Model:
    out = {v: 0 for v in variables(f)}
    out.update({v: x for v, x in model.items() if v in out})
    return out


def check_sat_uncached(f: Formula, node_budget: int = DEFAULT_NODE_BUDGET) -> Model | None:
    budget = _Budget(node_budget)
    nnf = to_nnf(f)
    if isinstance(nnf, BoolConst):
        return _complete({}, f) if nnf.value else None
    enc = _Encoding()
    enc.add_top(nnf)
    model = _Cdcl(enc, budget).run()
    if model is None:
        return None
    return _complete(model, f)


class Solver:
    """A solver handle owning a query cache and per-run counters."""

    def __init__(self, node_budget: int = DEFAULT_NODE_BUDGET):
        self.node_budget = node_budget
        self.calls = 0
        self._cache: dict[Formula, Model | None] = {}

    def check_sat(self, f: Formula) -> Model | None:
        """Return an integer model of ``f`` or ``None`` if ``f`` is unsatisfiable."""
        self.calls += 1
        if f in self._cache:
            return self._cache[f]
        model = check_sat_uncached(f, self.node_budget)
        self._cache[f] = model
        return model

    def is_sat(self, f: Formula) -> bool:
        return self.check_sat(f) is not None

    def entails(self, a: Formula, b: Formula) -> bool:
        if a == b or b == TRUE or a == FALSE:
            return True
        return self.check_sat(conj(a, neg(b))) is None

    def counterexample(self, a: Formula, b: Formula) -> Model | None:
        """A model of ``a`` violating ``b``, if any."""
        return self.check_sat(conj(a, neg(b)))


def check_sat(f: Formula, node_budget: int = DEFAULT_NODE_BUDGET) -> Model | None:
    return check_sat_uncached(f, node_budget)


def entails(a: Formula, b: Formula, node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    return Solver(node_budget).entails(a, b)


def is_model(model: Mapping[str, int], f: Formula) -> bool:
    env = {v: 0 for v in variables(f)}
    env.update(model)
    return evaluate(f, env)
