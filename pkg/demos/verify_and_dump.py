"""Verify one program, dump its precision, and rerun from the dump.

    python3 demos/verify_and_dump.py
"""

from __future__ import annotations

from precision_reuse.cfa import build_cfa
from precision_reuse.engine import dump_final_precision, verify
from precision_reuse.minimp import parse_program
from precision_reuse.precision import PREDICATE, read_precision_file

SOURCE = """
int lock;

void acquire() {
  if (lock != 0) error();
  lock = 1;
}

void release() {
  if (lock != 1) error();
  lock = 0;
}

void main() {
  while (*) {
    acquire();
    release();
  }
}
"""


def main() -> None:
    cfa = build_cfa(parse_program(SOURCE))
    first = verify(cfa, PREDICATE)
    print("from scratch:", first.verdict, "refinements:", first.stats.refinements)

    dump = dump_final_precision(first)
    print("dumped precision:")
    print(dump.decode())

    again = verify(cfa, PREDICATE, initial=read_precision_file(dump, PREDICATE))
    print("from the dump:", again.verdict, "refinements:", again.stats.refinements)


if __name__ == "__main__":
    main()
