"""Show how the reuse scope reacts to shifted location numbers.

The ``shift`` sequence inserts one statement between revisions, so every
later location number moves by one.  Location-scoped reuse reads the old
numbers and must refine again; function-scoped reuse does not care.

    python3 demos/scope_shift.py
"""

from __future__ import annotations

from precision_reuse.corpus import SEQUENCES
from precision_reuse.precision import PREDICATE
from precision_reuse.regression import load_sequence, run_sequence


def main() -> None:
    for scope in ("location", "function"):
        seq = load_sequence(SEQUENCES / "shift", domain=PREDICATE, scope=scope)
        rows = run_sequence(seq, compare=False).with_reuse
        counts = ", ".join(f"{r.revision_id}={r.stats.refinements}" for r in rows)
        print(f"{scope:>8} scope refinements: {counts}")


if __name__ == "__main__":
    main()
