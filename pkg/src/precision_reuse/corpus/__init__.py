"""Bundled benchmark programs and revision sequences.

Every file starts with a ``// expect: safe`` or ``// expect: unsafe`` line.
Inputs are bounded to [-8, 8] by assumptions and every loop is bounded, so
the concrete oracle can decide each program.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..minimp import SourceProgram

ROOT = Path(__file__).parent
PROGRAMS = ROOT / "programs"
SEQUENCES = ROOT / "sequences"

_EXPECT = re.compile(r"//\s*expect:\s*(safe|unsafe)")


@dataclass(frozen=True)
class CorpusProgram:
    name: str
    path: Path
    expected: str

    def source(self) -> SourceProgram:
        return SourceProgram(self.path.read_text(), self.name, self.path.stem)


def expected_verdict(text: str) -> str:
    m = _EXPECT.search(text)
    if not m:
        raise ValueError("missing '// expect:' line")
    return m.group(1)


def _entry(path: Path, name: str) -> CorpusProgram:
    return CorpusProgram(name, path, expected_verdict(path.read_text()))


def single_programs() -> list[CorpusProgram]:
    return [_entry(p, p.stem) for p in sorted(PROGRAMS.glob("*.mi"))]


def sequence_dirs() -> list[Path]:
    return sorted(p for p in SEQUENCES.iterdir() if p.is_dir())


def sequence_programs() -> list[CorpusProgram]:
    return [_entry(p, f"{d.name}/{p.stem}") for d in sequence_dirs() for p in sorted(d.glob("*.mi"))]


def all_programs() -> list[CorpusProgram]:
    return single_programs() + sequence_programs()
