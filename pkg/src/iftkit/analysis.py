"""Control-effectiveness analyses over incident fault trees.

Four views are computed per case, all over the guarded edges of the tree:

* edges — how many edges each control class inhibits in total,
* level — the same restricted to level-1 edges (nothing guarded below),
* phase — the same restricted to phase-1 edges (the chronologically first
  subtree under the top event),
* level+phase — edges that are simultaneously level 1 and phase 1.

An edge's class is CE when every control on it belongs to the baseline
taxonomy, AC when every control is an additional control, and Mixed
otherwise. A whole case is classified at a scope (phase 1, or level 1 +
phase 1) by the same rule lifted to the scoped edges: CE only if nothing
but CE-class edges appear there, AC only if nothing but AC-class, Mixed
otherwise, and explicitly unclassifiable when the scope is empty.

Corpus aggregation recomputes every total from the per-case rows. When a
claimed reference table is supplied, the auditor reports each mismatch
between claimed and recomputed values rather than silently adopting either
side; rows whose own counts are internally inconsistent are flagged too.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, TextIO

from .model import (
    ALL_CONTROLS,
    Category,
    Control,
    ControlFamily,
    FaultTree,
    GuardedEdge,
    control_sort_key,
    guarded_edges,
)


class ControlClass(Enum):
    CE = "CE"
    AC = "AC"
    MIXED = "Mixed"


class CaseMitigation(Enum):
    CE = "CE"
    AC = "AC"
    MIXED = "Mixed"
    UNCLASSIFIABLE = "Unclassifiable"


class Scope(Enum):
    P1 = "p1"
    L1P1 = "l1p1"


def classify_controls(controls: Sequence[Control]) -> ControlClass:
    """Class of a control list: CE-only, AC-only, or Mixed."""
    if not controls:
        raise ValueError("cannot classify an empty control list")
    families = {control.family for control in controls}
    if families == {ControlFamily.CE}:
        return ControlClass.CE
    if families == {ControlFamily.AC}:
        return ControlClass.AC
    return ControlClass.MIXED


def classify_edge(edge: GuardedEdge) -> ControlClass:
    return classify_controls(edge.controls)


ROW_COUNT_FIELDS = (
    "total_edges",
    "ce_edges", "ac_edges", "mixed_edges",
    "ce_l1", "ac_l1", "mixed_l1",
    "ce_p1", "ac_p1", "mixed_p1",
    "ce_l1p1", "ac_l1p1", "mixed_l1p1",
)

ROW_FIELDS = ("case_id", "category") + ROW_COUNT_FIELDS


@dataclass(frozen=True)
class CaseAnalysisRow:
    """One incident's thirteen analysis counts.

    Rows computed by :func:`case_row` always satisfy the partition and
    monotonicity invariants; rows loaded from a reference file are kept
    verbatim and checked by :meth:`inconsistencies` instead.
    """

    case_id: str
    category: Category
    total_edges: int
    ce_edges: int
    ac_edges: int
    mixed_edges: int
    ce_l1: int
    ac_l1: int
    mixed_l1: int
    ce_p1: int
    ac_p1: int
    mixed_p1: int
    ce_l1p1: int
    ac_l1p1: int
    mixed_l1p1: int

    def counts(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in ROW_COUNT_FIELDS)

    def scoped(self, scope: Scope) -> tuple[int, int, int]:
        if scope is Scope.P1:
            return (self.ce_p1, self.ac_p1, self.mixed_p1)
        return (self.ce_l1p1, self.ac_l1p1, self.mixed_l1p1)

    def inconsistencies(self) -> list[str]:
        """Internal contradictions, e.g. class counts not summing to the total."""
        problems = []
        class_sum = self.ce_edges + self.ac_edges + self.mixed_edges
        if class_sum != self.total_edges:
            problems.append(
                f"class counts sum to {class_sum}, total_edges is {self.total_edges}")
        for prefix in ("ce", "ac", "mixed"):
            whole = getattr(self, f"{prefix}_edges")
            l1 = getattr(self, f"{prefix}_l1")
            p1 = getattr(self, f"{prefix}_p1")
            l1p1 = getattr(self, f"{prefix}_l1p1")
            if l1 > whole:
                problems.append(f"{prefix}_l1 ({l1}) exceeds {prefix}_edges ({whole})")
            if p1 > whole:
                problems.append(f"{prefix}_p1 ({p1}) exceeds {prefix}_edges ({whole})")
            if l1p1 > l1:
                problems.append(f"{prefix}_l1p1 ({l1p1}) exceeds {prefix}_l1 ({l1})")
            if l1p1 > p1:
                problems.append(f"{prefix}_l1p1 ({l1p1}) exceeds {prefix}_p1 ({p1})")
        return problems


def case_row(tree: FaultTree) -> CaseAnalysisRow:
    """Compute the full analysis record for one incident."""
    edges = guarded_edges(tree)
    tallies = {name: 0 for name in ROW_COUNT_FIELDS}
    suffix_by_class = {ControlClass.CE: "ce", ControlClass.AC: "ac",
                       ControlClass.MIXED: "mixed"}
    for edge in edges:
        prefix = suffix_by_class[classify_edge(edge)]
        tallies["total_edges"] += 1
        tallies[f"{prefix}_edges"] += 1
        if edge.level == 1:
            tallies[f"{prefix}_l1"] += 1
        if edge.phase == 1:
            tallies[f"{prefix}_p1"] += 1
        if edge.level == 1 and edge.phase == 1:
            tallies[f"{prefix}_l1p1"] += 1
    return CaseAnalysisRow(case_id=tree.metadata.case_id,
                           category=tree.metadata.category, **tallies)


def case_mitigation_class(row: CaseAnalysisRow, scope: Scope) -> CaseMitigation:
    """Classify a whole case at a scope; an empty scope is never defaulted."""
    ce, ac, mixed = row.scoped(scope)
    if ce + ac + mixed == 0:
        return CaseMitigation.UNCLASSIFIABLE
    if ac == 0 and mixed == 0:
        return CaseMitigation.CE
    if ce == 0 and mixed == 0:
        return CaseMitigation.AC
    return CaseMitigation.MIXED


# --- aggregation and audit ---------------------------------------------------


@dataclass(frozen=True)
class AnalysisTotals:
    """One summary line: a total plus its CE/AC/Mixed split."""

    total: int
    ce: int
    ac: int
    mixed: int


@dataclass(frozen=True)
class ClaimedSummary:
    """Reference values to audit against, any subset may be present."""

    edge: AnalysisTotals | None = None
    level: AnalysisTotals | None = None
    phase: AnalysisTotals | None = None
    level_phase: AnalysisTotals | None = None


@dataclass(frozen=True)
class DiscrepancyNote:
    location: str
    claimed: int | None
    recomputed: int | None
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


@dataclass
class CorpusSummary:
    """Aggregate counts across a corpus, in the shape of the summary table."""

    case_count: int
    edge_totals: AnalysisTotals
    l1_totals: AnalysisTotals
    p1_cases: dict[CaseMitigation, int]
    l1p1_cases: dict[CaseMitigation, int]
    category_counts: dict[Category, int]
    notes: list[DiscrepancyNote]


def _sum_totals(rows: Sequence[CaseAnalysisRow], names: tuple[str, str, str],
                total_name: str | None) -> AnalysisTotals:
    ce = sum(getattr(row, names[0]) for row in rows)
    ac = sum(getattr(row, names[1]) for row in rows)
    mixed = sum(getattr(row, names[2]) for row in rows)
    if total_name is None:
        total = ce + ac + mixed
    else:
        total = sum(getattr(row, total_name) for row in rows)
    return AnalysisTotals(total=total, ce=ce, ac=ac, mixed=mixed)


def _case_tally(rows: Sequence[CaseAnalysisRow], scope: Scope) -> dict[CaseMitigation, int]:
    tally = {kind: 0 for kind in CaseMitigation}
    for row in rows:
        tally[case_mitigation_class(row, scope)] += 1
    return tally


def aggregate_corpus(rows: Sequence[CaseAnalysisRow],
                     claimed: ClaimedSummary | None = None) -> CorpusSummary:
    """Column sums and case tallies; audits against ``claimed`` when given."""
    if not rows:
        raise ValueError("cannot aggregate an empty corpus")
    summary = CorpusSummary(
        case_count=len(rows),
        edge_totals=_sum_totals(rows, ("ce_edges", "ac_edges", "mixed_edges"),
                                "total_edges"),
        l1_totals=_sum_totals(rows, ("ce_l1", "ac_l1", "mixed_l1"), None),
        p1_cases=_case_tally(rows, Scope.P1),
        l1p1_cases=_case_tally(rows, Scope.L1P1),
        category_counts={cat: sum(1 for r in rows if r.category is cat)
                         for cat in Category},
        notes=[],
    )
    summary.notes = audit_consistency(rows, claimed, summary=summary)
    return summary


def audit_consistency(rows: Sequence[CaseAnalysisRow],
                      claimed: ClaimedSummary | None,
                      summary: CorpusSummary | None = None) -> list[DiscrepancyNote]:
    """One note per mismatch between recomputed and claimed values.

    Also flags rows whose own counts contradict each other, since those
    surface in any recomputed aggregate.
    """
    if summary is None and rows:
        summary = aggregate_corpus(rows)
    notes: list[DiscrepancyNote] = []

    for row in rows:
        for problem in row.inconsistencies():
            notes.append(DiscrepancyNote(
                location=f"row {row.case_id}", claimed=None, recomputed=None,
                message=f"internally inconsistent: {problem}"))

    if claimed is None or summary is None:
        return notes

    def compare(location: str, claimed_value: int, recomputed_value: int) -> None:
        if claimed_value != recomputed_value:
            notes.append(DiscrepancyNote(
                location=location, claimed=claimed_value,
                recomputed=recomputed_value,
                message=f"claimed {claimed_value}, recomputed {recomputed_value}"))

    for name, recomputed in (("edge", summary.edge_totals),
                             ("level", summary.l1_totals)):
        reference = getattr(claimed, name)
        if reference is None:
            continue
        compare(f"{name}.total", reference.total, recomputed.total)
        compare(f"{name}.ce", reference.ce, recomputed.ce)
        compare(f"{name}.ac", reference.ac, recomputed.ac)
        compare(f"{name}.mixed", reference.mixed, recomputed.mixed)

    for name, tally in (("phase", summary.p1_cases),
                        ("level_phase", summary.l1p1_cases)):
        reference = getattr(claimed, name)
        if reference is None:
            continue
        compare(f"{name}.total", reference.total, summary.case_count)
        compare(f"{name}.ce", reference.ce, tally[CaseMitigation.CE])
        compare(f"{name}.ac", reference.ac, tally[CaseMitigation.AC])
        compare(f"{name}.mixed", reference.mixed, tally[CaseMitigation.MIXED])

    return notes


# --- control frequency and ransomware patterns -------------------------------


def control_frequency(corpus: Iterable[FaultTree]) -> dict[Control, int]:
    """Per control: the number of distinct incidents where it guards an edge.

    Presence is counted at incident level, not per edge, and every known
    control is reported even when its count is zero.
    """
    counts: Counter[Control] = Counter()
    for tree in corpus:
        present = {control for edge in guarded_edges(tree)
                   for control in edge.controls}
        counts.update(present)
    return {control: counts.get(control, 0) for control in ALL_CONTROLS}


@dataclass(frozen=True)
class ControlUsage:
    control: Control
    incidents: int
    at_level_one: bool


@dataclass(frozen=True)
class PairUsage:
    ce: Control
    ac: Control
    incidents: int
    at_level_one: bool


@dataclass(frozen=True)
class VariantPattern:
    variant: str
    cases: int
    most_used_ce: tuple[ControlUsage, ...]
    most_used_ac: tuple[ControlUsage, ...]
    most_used_mixed: tuple[PairUsage, ...]


def _modal_level_is_one(levels: Sequence[int]) -> bool:
    # Level 1 ties with or beats every other level's occurrence count.
    counter = Counter(levels)
    ones = counter.get(1, 0)
    return ones > 0 and ones == max(counter.values())


def ransomware_patterns(corpus: Iterable[FaultTree]) -> dict[str, VariantPattern]:
    """Per ransomware variant: the most-used controls and control pairs.

    "Most used" means the highest incident-presence count within the
    variant's incidents; ties are reported in full. Controls and pairs are
    marked as level-one when level 1 is (one of) their modal edge levels.
    Incidents without a variant string are grouped under "Unspecified".
    """
    groups: dict[str, list[FaultTree]] = {}
    for tree in corpus:
        if tree.metadata.category is not Category.RANSOMWARE:
            continue
        variant = tree.metadata.variant or "Unspecified"
        groups.setdefault(variant, []).append(tree)

    patterns: dict[str, VariantPattern] = {}
    for variant, trees in sorted(groups.items()):
        control_presence: Counter[Control] = Counter()
        control_levels: dict[Control, list[int]] = {}
        pair_presence: Counter[tuple[Control, Control]] = Counter()
        pair_levels: dict[tuple[Control, Control], list[int]] = {}

        for tree in trees:
            seen_controls: set[Control] = set()
            seen_pairs: set[tuple[Control, Control]] = set()
            for edge in guarded_edges(tree):
                for control in edge.controls:
                    seen_controls.add(control)
                    control_levels.setdefault(control, []).append(edge.level)
                if classify_edge(edge) is ControlClass.MIXED:
                    ce_side = [c for c in edge.controls if c.family is ControlFamily.CE]
                    ac_side = [c for c in edge.controls if c.family is ControlFamily.AC]
                    for ce in ce_side:
                        for ac in ac_side:
                            seen_pairs.add((ce, ac))
                            pair_levels.setdefault((ce, ac), []).append(edge.level)
            control_presence.update(seen_controls)
            pair_presence.update(seen_pairs)

        def top_controls(family: ControlFamily) -> tuple[ControlUsage, ...]:
            in_family = {c: n for c, n in control_presence.items()
                         if c.family is family}
            if not in_family:
                return ()
            best = max(in_family.values())
            winners = sorted((c for c, n in in_family.items() if n == best),
                             key=control_sort_key)
            return tuple(ControlUsage(
                control=c, incidents=best,
                at_level_one=_modal_level_is_one(control_levels[c]))
                for c in winners)

        def top_pairs() -> tuple[PairUsage, ...]:
            if not pair_presence:
                return ()
            best = max(pair_presence.values())
            winners = sorted((p for p, n in pair_presence.items() if n == best),
                             key=lambda p: (control_sort_key(p[0]), control_sort_key(p[1])))
            return tuple(PairUsage(
                ce=ce, ac=ac, incidents=best,
                at_level_one=_modal_level_is_one(pair_levels[(ce, ac)]))
                for ce, ac in winners)

        patterns[variant] = VariantPattern(
            variant=variant, cases=len(trees),
            most_used_ce=top_controls(ControlFamily.CE),
            most_used_ac=top_controls(ControlFamily.AC),
            most_used_mixed=top_pairs(),
        )
    return patterns


# --- delimiter-separated input and output ------------------------------------


def load_rows(source: TextIO | str) -> list[CaseAnalysisRow]:
    """Read analysis rows from delimiter-separated text with a header row."""
    handle = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        raise ValueError("rows file is empty; a header row is required")
    missing = [name for name in ROW_FIELDS if name not in reader.fieldnames]
    if missing:
        raise ValueError(f"rows file is missing columns: {', '.join(missing)}")
    rows = []
    for record in reader:
        counts = {name: int(record[name]) for name in ROW_COUNT_FIELDS}
        rows.append(CaseAnalysisRow(case_id=record["case_id"],
                                    category=Category(record["category"]),
                                    **counts))
    return rows


def dump_rows(rows: Sequence[CaseAnalysisRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([row.case_id, row.category.value, *row.counts()])
    return out.getvalue()


_CLAIM_SECTIONS = ("edge", "level", "phase", "level_phase")


def load_claims(source: TextIO | str) -> ClaimedSummary:
    """Read a claimed reference table: analysis,total,ce,ac,mixed per line."""
    handle = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(handle)
    expected = ("analysis", "total", "ce", "ac", "mixed")
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in expected):
        raise ValueError("claims file requires columns: " + ", ".join(expected))
    values: dict[str, AnalysisTotals] = {}
    for record in reader:
        name = record["analysis"]
        if name not in _CLAIM_SECTIONS:
            raise ValueError(f"unknown analysis name in claims file: {name!r}")
        if name in values:
            raise ValueError(f"duplicate analysis name in claims file: {name!r}")
        values[name] = AnalysisTotals(total=int(record["total"]),
                                      ce=int(record["ce"]),
                                      ac=int(record["ac"]),
                                      mixed=int(record["mixed"]))
    return ClaimedSummary(**{name: values.get(name) for name in _CLAIM_SECTIONS})
