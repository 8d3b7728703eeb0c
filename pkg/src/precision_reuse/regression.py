"""Verify revision sequences with and without precision reuse."""

from __future__ import annotations

import csv
import io
import json
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .cfa import build_cfa
from .engine import RESOURCE_OUT, RunResult, Stats, VerifyOptions, dump_final_precision, verify
from .minimp import ParseError, SourceProgram, parse_program
from .precision import DEFAULT_SCOPE, PREDICATE, ProgramPrecision, read_precision_file, rescope

MANIFEST = "manifest.txt"
SOURCE_SUFFIX = ".mi"


@dataclass
class RevisionSequence:
    name: str
    revisions: list[SourceProgram]
    domain: str = PREDICATE
    reuse: bool = True
    scope: str = DEFAULT_SCOPE
    abstraction: str = "boolean"

    def __post_init__(self) -> None:
        if not self.revisions:
            raise ValueError("a revision sequence needs at least one revision")


@dataclass
class TaskResult:
    revision_id: str
    verdict: str
    stats: Stats
    diff_lines: int | None = None
    reused_precision_bytes_in: int = 0
    reason: str = ""

    @property
    def solved(self) -> bool:
        return self.verdict != RESOURCE_OUT

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stats"] = self.stats.as_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "TaskResult":
        d = dict(d)
        d["stats"] = Stats(**d["stats"])
        return TaskResult(**d)


@dataclass
class Report:
    sequence: str
    domain: str = PREDICATE
    scope: str = DEFAULT_SCOPE
    abstraction: str = "boolean"
    with_reuse: list[TaskResult] = field(default_factory=list)
    without_reuse: list[TaskResult] = field(default_factory=list)

    def totals(self, mode: str) -> dict[str, float]:
        rows = self.with_reuse if mode == "reuse" else self.without_reuse
        return {
            "refinements": sum(r.stats.refinements for r in rows),
            "abstractions": sum(r.stats.abstraction_computations for r in rows),
            "cpu_time": sum(r.stats.cpu_time for r in rows),
            "solved": sum(r.solved for r in rows),
        }

    @property
    def speedup(self) -> float | None:
        """Time without reuse over time with reuse.

        The first revision is left out (it cannot profit from reuse), as is
        every revision that either mode failed to solve.
        """
        return compute_speedup(self.without_reuse, self.with_reuse)

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "domain": self.domain,
            "scope": self.scope,
            "abstraction": self.abstraction,
            "with_reuse": [r.to_dict() for r in self.with_reuse],
            "without_reuse": [r.to_dict() for r in self.without_reuse],
            "totals": {m: self.totals(m) for m in ("reuse", "baseline")},
            "speedup": self.speedup,
        }

    @staticmethod
    def from_dict(d: dict) -> "Report":
        return Report(
            d["sequence"],
            d["domain"],
            d["scope"],
            d["abstraction"],
            [TaskResult.from_dict(x) for x in d["with_reuse"]],
            [TaskResult.from_dict(x) for x in d["without_reuse"]],
        )


def compute_speedup(baseline: list[TaskResult], reuse: list[TaskResult]) -> float | None:
    num = den = 0.0
    for i, (b, r) in enumerate(zip(baseline, reuse)):
        if i == 0 or not (b.solved and r.solved):
            continue
        num += b.stats.cpu_time
        den += r.stats.cpu_time
    if den <= 0:
        return None
    return num / den


# ---------------------------------------------------------------- diffing


def _normalize(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        squeezed = "".join(line.split())
        if squeezed:
            out.append(squeezed)
    return out


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def diff_lines(a: SourceProgram | str, b: SourceProgram | str) -> int:
    """Added plus removed lines, ignoring whitespace and blank lines."""
    ta = a.text if isinstance(a, SourceProgram) else a
    tb = b.text if isinstance(b, SourceProgram) else b
    la, lb = _normalize(ta), _normalize(tb)
    common = _lcs_length(la, lb)
    return (len(la) - common) + (len(lb) - common)


# ---------------------------------------------------------------- loading


def read_manifest(path: Path) -> list[Path]:
    entries = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            p = Path(line)
            entries.append(p if p.is_absolute() else path.parent / p)
    return entries


def load_sequence(path: str | Path, **flags) -> RevisionSequence:
    """Load revisions from a manifest file or a directory.

    A directory uses its ``manifest.txt`` if present and otherwise all
    ``*.mi`` files in name order.
    """
    path = Path(path)
    if path.is_dir():
        manifest = path / MANIFEST
        files = read_manifest(manifest) if manifest.exists() else sorted(path.glob(f"*{SOURCE_SUFFIX}"))
        name = path.name
    else:
        files = read_manifest(path)
        name = path.parent.name if path.name == MANIFEST else path.stem
    revisions = [SourceProgram(f.read_text(), f.name, f.stem) for f in files]
    return RevisionSequence(name, revisions, **flags)


# ---------------------------------------------------------------- running


def _run_mode(seq: RevisionSequence, reuse: bool, opts: VerifyOptions, workdir: Path) -> list[TaskResult]:
    results: list[TaskResult] = []
    previous: Path | None = None
    for i, rev in enumerate(seq.revisions):
        diff = diff_lines(seq.revisions[i - 1], rev) if i else None
        try:
            cfa = build_cfa(parse_program(rev))
        except ParseError as exc:
            results.append(TaskResult(rev.revision_id, RESOURCE_OUT, Stats(), diff, 0, f"parse error: {exc}"))
            previous = None
            continue
        initial = ProgramPrecision(seq.domain)
        bytes_in = 0
        if reuse and previous is not None:
            data = previous.read_bytes()
            bytes_in = len(data)
            initial = rescope(read_precision_file(data, seq.domain), seq.scope, cfa)
        run: RunResult = verify(cfa, seq.domain, initial, opts)
        out = workdir / f"{'reuse' if reuse else 'base'}-{i:03d}.prec"
        out.write_bytes(dump_final_precision(run))
        previous = out
        results.append(TaskResult(rev.revision_id, run.verdict.kind, run.stats, diff, bytes_in, run.verdict.reason))
    return results


def run_sequence(seq: RevisionSequence, opts: VerifyOptions | None = None, compare: bool = True) -> Report:
    """Verify every revision in order.

    With reuse, each revision starts from the precision file written for
    the previous one; the baseline starts every revision from scratch.
    ``compare`` runs both; otherwise only the mode chosen by ``seq.reuse``.
    """
    opts = opts or VerifyOptions()
    opts = VerifyOptions(seq.domain, seq.abstraction, opts.max_nodes, opts.time_limit, opts.solver_nodes)
    report = Report(seq.name, seq.domain, seq.scope, seq.abstraction)
    with tempfile.TemporaryDirectory(prefix="precision-reuse-") as tmp:
        work = Path(tmp)
        if compare or seq.reuse:
            report.with_reuse = _run_mode(seq, True, opts, work)
        if compare or not seq.reuse:
            report.without_reuse = _run_mode(seq, False, opts, work)
    return report


# ---------------------------------------------------------------- output

COLUMNS = [
    "mode",
    "revision",
    "verdict",
    "refinements",
    "abstractions",
    "solver_calls",
    "cpu_time",
    "arg_nodes",
    "diff_lines",
    "precision_bytes_in",
    "precision_bytes_out",
]


def _rows(report: Report) -> Iterable[list]:
    for mode, rows in (("reuse", report.with_reuse), ("baseline", report.without_reuse)):
        for r in rows:
            s = r.stats
            yield [
                mode,
                r.revision_id,
                r.verdict,
                s.refinements,
                s.abstraction_computations,
                s.solver_calls,
                s.cpu_time,
                s.arg_nodes,
                "" if r.diff_lines is None else r.diff_lines,
                r.reused_precision_bytes_in,
                s.precision_bytes_out,
            ]


def _two_digits(x: float) -> str:
    return f"{x:.2g}"


def emit_report(report: Report, fmt: str = "table") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        rows = list(_rows(report))
        for row in rows:
            w.writerow(row[:6] + [repr(row[6])] + row[7:])
        for mode in ("reuse", "baseline"):
            if any(r[0] == mode for r in rows):
                t = report.totals(mode)
                w.writerow([mode, "TOTAL", "", t["refinements"], t["abstractions"], "", repr(t["cpu_time"]), "", "", "", ""])
        if report.with_reuse and report.without_reuse:
            sp = report.speedup
            w.writerow(["speedup", "", "", "", "", "", "" if sp is None else repr(sp), "", "", "", ""])
        return buf.getvalue().encode()
    if fmt == "table":
        header = ["mode", "rev", "verdict", "refs", "abstr", "calls", "cpu(s)", "nodes", "diff", "in(B)", "out(B)"]
        body = [[str(c) if i != 6 else _two_digits(c) for i, c in enumerate(row)] for row in _rows(report)]
        for mode in ("reuse", "baseline"):
            if any(r[0] == mode for r in body):
                t = report.totals(mode)
                body.append([mode, "TOTAL", "", str(t["refinements"]), str(t["abstractions"]), "", _two_digits(t["cpu_time"]), "", "", "", ""])
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        lines = [f"sequence {report.sequence} ({report.domain}, scope={report.scope})"]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
        lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
        if report.with_reuse and report.without_reuse:
            sp = report.speedup
            lines.append(f"speedup: {'n/a' if sp is None else f'{sp:.2f}'}")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")
