"""Run a bundled revision sequence with and without precision reuse.

    python3 demos/sequence_reuse.py [sequence] [explicit|predicate]
"""

from __future__ import annotations

import sys

from precision_reuse.corpus import SEQUENCES
from precision_reuse.regression import emit_report, load_sequence, run_sequence


def main(name: str = "long_loop", domain: str = "explicit") -> None:
    seq = load_sequence(SEQUENCES / name, domain=domain)
    report = run_sequence(seq, compare=True)
    print(emit_report(report, "table").decode())
    base, reuse = report.totals("baseline"), report.totals("reuse")
    print(f"refinements: {base['refinements']} without reuse, {reuse['refinements']} with reuse")


if __name__ == "__main__":
    main(*sys.argv[1:3])
