"""Program precisions, their text file format, and reuse scoping.

A program precision maps every location to a domain precision: a set of
variable names for the explicit-value domain, a set of canonical predicates
for the predicate domain.  It is stored in three layers (all locations, per
function, per location) which mirror the three kinds of scope selectors in
the file format::

    <header>

    * main 12:
    <precision lines>

    f:
    <precision lines>

Blocks are separated by one blank line.  The explicit domain has an empty
header and lists one variable per line.  The predicate domain declares the
variables and names the predicates in an SMT-LIB header and lists
``(assert tN)`` lines in the blocks.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .formula import Atom, atoms, predicate_key
from .smtlib import SmtDefinitions, SmtError, parse_smt_subset, render_smt_subset

log = logging.getLogger(__name__)

EXPLICIT = "explicit"
PREDICATE = "predicate"
KINDS = (EXPLICIT, PREDICATE)

LOCATION = "location"
FUNCTION = "function"
GLOBAL = "global"
SCOPES = (LOCATION, FUNCTION, GLOBAL)
DEFAULT_SCOPE = FUNCTION

ExplicitPrecision = frozenset  # of variable names
PredicatePrecision = frozenset  # of canonical Atoms

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")
_VARLINE = re.compile(r"[A-Za-z_][A-Za-z0-9_.#!]*\Z")


class PrecisionFormatError(ValueError):
    pass


def atom_sort_key(a: Atom):
    return (tuple(v for v, _ in a.coeffs), a.coeffs, a.op, a.bound)


def _sorted_items(kind: str, items: Iterable):
    return sorted(items, key=atom_sort_key) if kind == PREDICATE else sorted(items)


def _predicate_set(items: Iterable) -> frozenset:
    return frozenset(predicate_key(a) if isinstance(a, Atom) else a for a in items)


@dataclass(frozen=True, eq=False)
class ProgramPrecision:
    """Layered mapping from locations to domain precisions.

    ``effective(l) = global | per_function[func(l)] | per_location[l]``.
    Empty entries are dropped on construction so that equal precisions
    compare equal.  Predicates are stored by their ``predicate_key``: a
    predicate and its complement track the same information.
    """

    kind: str
    global_: frozenset = frozenset()
    per_function: Mapping[str, frozenset] = field(default_factory=dict)
    per_location: Mapping[int, frozenset] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown precision kind {self.kind!r}")
        norm = frozenset if self.kind == EXPLICIT else _predicate_set
        object.__setattr__(self, "global_", norm(self.global_))
        object.__setattr__(self, "per_function", {k: norm(v) for k, v in sorted(self.per_function.items()) if v})
        object.__setattr__(self, "per_location", {int(k): norm(v) for k, v in sorted(self.per_location.items()) if v})

    @classmethod
    def empty(cls, kind: str) -> "ProgramPrecision":
        return cls(kind)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProgramPrecision):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.global_ == other.global_
            and self.per_function == other.per_function
            and self.per_location == other.per_location
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.global_, frozenset(self.per_function.items()), frozenset(self.per_location.items())))

    def at(self, loc: int, function: str | None) -> frozenset:
        out = self.global_
        if function is not None and function in self.per_function:
            out = out | self.per_function[function]
        if loc in self.per_location:
            out = out | self.per_location[loc]
        return out

    def is_empty(self) -> bool:
        return not (self.global_ or self.per_function or self.per_location)

    def entries(self) -> frozenset:
        """Union of all stored entries."""
        out = set(self.global_)
        for v in self.per_function.values():
            out |= v
        for v in self.per_location.values():
            out |= v
        return frozenset(out)

    def size(self) -> int:
        return len(self.global_) + sum(map(len, self.per_function.values())) + sum(map(len, self.per_location.values()))

    def with_global(self, items: Iterable) -> "ProgramPrecision":
        return ProgramPrecision(self.kind, self.global_ | frozenset(items), self.per_function, self.per_location)

    def with_function(self, function: str, items: Iterable) -> "ProgramPrecision":
        layer = dict(self.per_function)
        layer[function] = layer.get(function, frozenset()) | frozenset(items)
        return ProgramPrecision(self.kind, self.global_, layer, self.per_location)

    def with_location(self, loc: int, items: Iterable) -> "ProgramPrecision":
        layer = dict(self.per_location)
        layer[loc] = layer.get(loc, frozenset()) | frozenset(items)
        return ProgramPrecision(self.kind, self.global_, self.per_function, layer)

    def __or__(self, other: "ProgramPrecision") -> "ProgramPrecision":
        return union(self, other)


def union(p1: ProgramPrecision, p2: ProgramPrecision) -> ProgramPrecision:
    """Layer-wise union; the effective precision of the result is the pointwise union."""
    if p1.kind != p2.kind:
        raise ValueError(f"cannot unite {p1.kind} and {p2.kind} precisions")
    funcs = dict(p1.per_function)
    for k, v in p2.per_function.items():
        funcs[k] = funcs.get(k, frozenset()) | v
    locs = dict(p1.per_location)
    for k, v in p2.per_location.items():
        locs[k] = locs.get(k, frozenset()) | v
    return ProgramPrecision(p1.kind, p1.global_ | p2.global_, funcs, locs)


def effective_precision_at(p: ProgramPrecision, loc: int, cfa=None, function: str | None = None) -> frozenset:
    """Effective precision at ``loc``; the function is taken from ``cfa`` unless given."""
    if function is None and cfa is not None:
        function = cfa.locations.get(loc)
    return p.at(loc, function)


# ------------------------------------------------------------------ scoping


def rescope(p: ProgramPrecision, strategy: str, cfa) -> ProgramPrecision:
    """Turn a stored precision into an initial precision for ``cfa``.

    ``location`` reads only the location numbers (and ``*``) as keys,
    ``function`` folds every location entry into the function that owns the
    location in ``cfa``, and ``global`` puts every entry everywhere.
    """
    if strategy == LOCATION:
        return ProgramPrecision(p.kind, p.global_, {}, p.per_location)
    if strategy == FUNCTION:
        funcs = dict(p.per_function)
        for loc, items in p.per_location.items():
            owner = cfa.locations.get(loc)
            if owner is None:
                log.warning("dropping precision for location %d, which does not exist", loc)
                continue
            funcs[owner] = funcs.get(owner, frozenset()) | items
        known = set(cfa.locations.values())
        for name in funcs:
            if name not in known:
                log.warning("precision mentions unknown function %r", name)
        return ProgramPrecision(p.kind, p.global_, funcs, {})
    if strategy == GLOBAL:
        return ProgramPrecision(p.kind, p.entries())
    raise ValueError(f"unknown reuse scope {strategy!r}")


# ------------------------------------------------------------------ writing


def _blocks(p: ProgramPrecision) -> list[tuple[list[str], frozenset]]:
    """Group selectors with identical precision: ``*`` first, then functions, then locations."""
    selectors: list[tuple[str, frozenset]] = []
    if p.global_:
        selectors.append(("*", p.global_))
    selectors += [(f, v) for f, v in sorted(p.per_function.items())]
    selectors += [(str(l), v) for l, v in sorted(p.per_location.items())]
    groups: dict[frozenset, list[str]] = {}
    for sel, items in selectors:
        groups.setdefault(items, []).append(sel)
    return [(sels, items) for items, sels in groups.items()]


def write_precision_file(p: ProgramPrecision, kind: str | None = None) -> bytes:
    kind = kind or p.kind
    if kind != p.kind:
        raise ValueError(f"cannot write a {p.kind} precision as {kind}")
    blocks = _blocks(p)
    parts: list[str] = []
    if kind == EXPLICIT:
        for sels, items in blocks:
            parts.append(" ".join(sels) + ":\n" + "".join(f"{v}\n" for v in sorted(items)))
        return "\n".join(parts).encode()
    preds = _sorted_items(PREDICATE, p.entries())
    names = {a: f"t{i + 1}" for i, a in enumerate(preds)}
    variables = sorted({v for a in preds for v in a.variables})
    header = render_smt_subset(variables, {names[a]: a for a in preds})
    for sels, items in blocks:
        body = "".join(f"(assert {names[a]})\n" for a in _sorted_items(PREDICATE, items))
        parts.append(" ".join(sels) + ":\n" + body)
    if not preds:
        return b""
    text = header + "\n"
    if parts:
        text += "\n" + "\n".join(parts)
    return text.encode()


# ------------------------------------------------------------------ reading


def _paragraphs(text: str) -> list[list[str]]:
    paras: list[list[str]] = []
    cur: list[str] = []
    for line in text.splitlines():
        if line.strip():
            cur.append(line.rstrip())
        elif cur:
            paras.append(cur)
            cur = []
    if cur:
        paras.append(cur)
    return paras


def _is_selector_line(line: str) -> bool:
    return line.endswith(":") and not line.lstrip().startswith("(")


def parse_selectors(line: str) -> list[str | int]:
    body = line.strip()
    if not body.endswith(":"):
        raise PrecisionFormatError(f"selector line must end with ':': {line!r}")
    tokens = body[:-1].split()
    if not tokens:
        raise PrecisionFormatError(f"empty selector line: {line!r}")
    out: list[str | int] = []
    for tok in tokens:
        if tok == "*":
            out.append("*")
        elif tok.isdigit():
            out.append(int(tok))
        elif _IDENT.match(tok):
            out.append(tok)
        else:
            raise PrecisionFormatError(f"malformed scope selector {tok!r}")
    return out


def read_precision_file(data: bytes | str, kind: str, known_functions: Iterable[str] | None = None) -> ProgramPrecision:
    """Parse a precision file.  Blocks for the same selector are united."""
    if kind not in KINDS:
        raise ValueError(f"unknown precision kind {kind!r}")
    text = data.decode() if isinstance(data, bytes) else data
    paras = _paragraphs(text)
    defs = SmtDefinitions()
    glob: set = set()
    funcs: dict[str, set] = {}
    locs: dict[int, set] = {}
    seen_block = False
    for para in paras:
        if not _is_selector_line(para[0]):
            if seen_block:
                raise PrecisionFormatError(f"expected a selector line, got {para[0]!r}")
            if kind == EXPLICIT:
                raise PrecisionFormatError("the explicit-value header must be empty")
            try:
                parse_smt_subset("\n".join(para), defs)
            except SmtError as exc:
                raise PrecisionFormatError(f"bad header: {exc}") from exc
            if defs.assertions:
                raise PrecisionFormatError("assertions are not allowed in the header")
            continue
        seen_block = True
        selectors = parse_selectors(para[0])
        items: set = set()
        for line in para[1:]:
            if kind == EXPLICIT:
                name = line.strip()
                if not _VARLINE.match(name):
                    raise PrecisionFormatError(f"bad variable name {name!r}")
                items.add(name)
            else:
                local = SmtDefinitions(defs.declarations, defs.definitions)
                try:
                    parse_smt_subset(line, local)
                except SmtError as exc:
                    raise PrecisionFormatError(f"bad precision line {line!r}: {exc}") from exc
                if not local.assertions or len(local.declarations) != len(defs.declarations):
                    raise PrecisionFormatError(f"precision lines must be assert commands: {line!r}")
                for f in local.assertions:
                    items |= atoms(f)
        for sel in selectors:
            if sel == "*":
                glob |= items
            elif isinstance(sel, int):
                locs.setdefault(sel, set()).update(items)
            else:
                funcs.setdefault(sel, set()).update(items)
    if known_functions is not None:
        known = set(known_functions)
        for name in funcs:
            if name not in known:
                log.warning("precision mentions unknown function %r", name)
    return ProgramPrecision(kind, glob, funcs, locs)
