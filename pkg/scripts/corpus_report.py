#!/usr/bin/env python3
"""Recompute the corpus summary from the bundled 45-row analysis table and
audit it against the claimed summary values.

Equivalent to:

    ift analyze --rows <reference_rows.csv> --claims <claimed_summary.csv>
"""

from iftkit.analysis import CaseMitigation, aggregate_corpus
from iftkit.fixtures import reference_rows, claimed_summary


def main() -> None:
    rows = reference_rows()
    summary = aggregate_corpus(rows, claimed_summary())

    print(f"cases: {summary.case_count}")
    print(f"edge totals:  total={summary.edge_totals.total} "
          f"CE={summary.edge_totals.ce} AC={summary.edge_totals.ac} "
          f"CE+AC={summary.edge_totals.mixed}")
    print(f"level totals: total={summary.l1_totals.total} "
          f"CE={summary.l1_totals.ce} AC={summary.l1_totals.ac} "
          f"CE+AC={summary.l1_totals.mixed}")
    for name, tally in (("phase", summary.p1_cases),
                        ("level+phase", summary.l1p1_cases)):
        print(f"{name} cases:  CE={tally[CaseMitigation.CE]} "
              f"AC={tally[CaseMitigation.AC]} "
              f"CE+AC={tally[CaseMitigation.MIXED]} "
              f"unclassifiable={tally[CaseMitigation.UNCLASSIFIABLE]}")

    print(f"\naudit findings ({len(summary.notes)}):")
    for note in summary.notes:
        print(f"  {note.location}: {note.message}")


if __name__ == "__main__":
    main()
