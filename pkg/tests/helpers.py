from __future__ import annotations

from precision_reuse.cfa import build_cfa
from precision_reuse.corpus import all_programs
from precision_reuse.minimp import parse_program


def cfa_of(src: str):
    return build_cfa(parse_program(src))


def corpus_cfa(name: str):
    prog = next(p for p in all_programs() if p.name == name)
    return build_cfa(parse_program(prog.source()))


def error_path(cfa, choose):
    """Walk from the entry taking ``choose(edges)`` until an error location."""
    loc, path = cfa.entry, []
    while not cfa.is_error(loc):
        e = choose(cfa.out_edges(loc))
        path.append(e)
        loc = e.target
    return path
