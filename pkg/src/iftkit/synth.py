"""Profile-driven synthesis of incident fault trees.

A synthesis profile states the thirteen analysis counts a tree should
exhibit. The builder places guarded edges so that analysing the synthesized
tree reproduces the profile exactly:

* each level-1 edge becomes its own branch (a guarded event over leaves),
* non-level-1 edges are stacked in a chain above the first level-1 branch
  of their phase, which fixes their level above one,
* phase-1 edges live in the chronologically first subtree; all remaining
  edges live in a second subtree (with an unguarded filler subtree put
  first when the profile wants an empty phase 1),
* a single leftover non-level-1 edge with no level-1 anchor outside phase 1
  is realized as the guard on the edge into the top event, which belongs to
  no phase.

Profiles that no tree can realize are rejected with the violated
constraints named. Output is deterministic for a fixed seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .analysis import ROW_COUNT_FIELDS, CaseAnalysisRow
from .model import (
    AC_CONTROL_NAMES,
    CE_CONTROL_NAMES,
    CaseMetadata,
    Category,
    Composition,
    Control,
    ControlFamily,
    EventKind,
    EventNode,
    FaultTree,
    GateKind,
    GateNode,
    InhibitAnnotation,
    Node,
)

_CLASSES = ("ce", "ac", "mixed")

_LABEL_POOL = (
    "credentials harvested", "service exposed to the internet",
    "payload executes", "privileges escalated", "persistence established",
    "defences disabled", "lateral movement succeeds", "data staged",
    "command channel opened", "account takeover", "share enumerated",
    "configuration weakened", "exploit delivered", "backup tampered",
)

_TAG_POOL = ("T1059", "T1059.001", "T1566.002", "T1486", "T1021.002",
             "T1078", "T1490", "T1562.001")


class UnsatisfiableProfileError(ValueError):
    """Raised for profiles whose targets no tree can exhibit."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("unsatisfiable profile: " + "; ".join(violations))


@dataclass(frozen=True)
class SynthesisProfile:
    """Target analysis counts plus case identity and an optional seed."""

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
    variant: str | None = None
    seed: int = 0

    @classmethod
    def from_row(cls, row: CaseAnalysisRow, seed: int = 0,
                 variant: str | None = None) -> "SynthesisProfile":
        counts = {name: getattr(row, name) for name in ROW_COUNT_FIELDS}
        return cls(case_id=row.case_id, category=row.category,
                   variant=variant, seed=seed, **counts)

    def expected_row(self) -> CaseAnalysisRow:
        counts = {name: getattr(self, name) for name in ROW_COUNT_FIELDS}
        return CaseAnalysisRow(case_id=self.case_id, category=self.category,
                               **counts)

    def _per_class(self, suffix: str) -> dict[str, int]:
        return {cls: getattr(self, f"{cls}_{suffix}") for cls in _CLASSES}

    def violations(self) -> list[str]:
        """Names of every constraint the targets violate; empty if satisfiable."""
        problems = []
        for name in ROW_COUNT_FIELDS:
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if problems:
            return problems

        edges = self._per_class("edges")
        l1 = self._per_class("l1")
        p1 = self._per_class("p1")
        l1p1 = self._per_class("l1p1")

        if sum(edges.values()) != self.total_edges:
            problems.append("total_edges must equal ce_edges + ac_edges + mixed_edges")
        for cls in _CLASSES:
            if l1[cls] > edges[cls]:
                problems.append(f"{cls}_l1 must not exceed {cls}_edges")
            if p1[cls] > edges[cls]:
                problems.append(f"{cls}_p1 must not exceed {cls}_edges")
            if l1p1[cls] > l1[cls]:
                problems.append(f"{cls}_l1p1 must not exceed {cls}_l1")
            if l1p1[cls] > p1[cls]:
                problems.append(f"{cls}_l1p1 must not exceed {cls}_p1")
            if l1[cls] - l1p1[cls] > edges[cls] - p1[cls]:
                problems.append(
                    f"{cls} level-1 edges outside phase 1 exceed the "
                    f"{cls} edges outside phase 1")
        if problems:
            return problems

        in_p1 = sum(p1.values())
        in_l1p1 = sum(l1p1.values())
        if in_p1 > 0 and in_l1p1 == 0:
            problems.append("phase 1 carries edges but no level-1 edge "
                            "(every non-empty phase needs one)")
        out_l1 = sum(l1[cls] - l1p1[cls] for cls in _CLASSES)
        out_rest = sum(edges[cls] - p1[cls] - (l1[cls] - l1p1[cls])
                       for cls in _CLASSES)
        if out_l1 == 0 and out_rest > 1:
            problems.append("edges outside phase 1 need a level-1 edge there "
                            "(only a single guard fits on the top edge)")
        if out_l1 == 0 and out_rest == 1 and in_p1 == 0:
            problems.append("a lone non-level-1 edge outside phase 1 requires "
                            "guarded edges in phase 1")
        return problems


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.nodes: dict[str, Node] = {}
        self.guards: dict[tuple[str, str], tuple[InhibitAnnotation, ...]] = {}
        self.counter = 0

    def next_id(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def label(self) -> str:
        return self.rng.choice(_LABEL_POOL)

    def tags(self) -> tuple[str, ...]:
        if self.rng.random() < 0.3:
            return (self.rng.choice(_TAG_POOL),)
        return ()

    def basic(self) -> str:
        node_id = self.next_id("b")
        kind = EventKind.UNDEVELOPED if self.rng.random() < 0.1 else EventKind.BASIC
        self.nodes[node_id] = EventNode(id=node_id, label=self.label(),
                                        kind=kind, techniques=self.tags())
        return node_id

    def gate_kind(self) -> GateKind:
        return GateKind.AND if self.rng.random() < 0.5 else GateKind.OR

    def intermediate(self, children: list[str],
                     annotations: tuple[InhibitAnnotation, ...] = ()) -> str:
        node_id = self.next_id("e")
        gate_id = f"{node_id}::gate"
        self.nodes[node_id] = EventNode(id=node_id, label=self.label(),
                                        kind=EventKind.INTERMEDIATE,
                                        techniques=self.tags(), gate=gate_id)
        self.nodes[gate_id] = GateNode(id=gate_id, kind=self.gate_kind(),
                                       children=tuple(children))
        if annotations:
            self.guards[(gate_id, node_id)] = annotations
        return node_id

    def pick_controls(self, cls: str) -> tuple[Control, ...]:
        rng = self.rng
        ce_pool = [Control(ControlFamily.CE, n) for n in CE_CONTROL_NAMES]
        ac_pool = [Control(ControlFamily.AC, n) for n in AC_CONTROL_NAMES]
        if cls == "ce":
            return tuple(rng.sample(ce_pool, rng.choice((1, 1, 2))))
        if cls == "ac":
            return tuple(rng.sample(ac_pool, rng.choice((1, 1, 2))))
        ce_part = rng.sample(ce_pool, rng.choice((1, 1, 2)))
        ac_part = rng.sample(ac_pool, 1)
        return tuple(ce_part + ac_part)

    def annotation(self, controls: tuple[Control, ...]) -> InhibitAnnotation:
        composition = Composition.PARALLEL
        if len(controls) >= 2 and self.rng.random() < 0.25:
            composition = Composition.SEQUENTIAL
        condition = None
        if self.rng.random() < 0.15:
            cond_id = self.next_id("cond")
            self.nodes[cond_id] = EventNode(id=cond_id, label=self.label(),
                                            kind=EventKind.CONDITIONING)
            condition = cond_id
        return InhibitAnnotation(controls=controls, composition=composition,
                                 condition=condition)

    def annotations_for(self, cls: str) -> tuple[InhibitAnnotation, ...]:
        # Occasionally split a mixed edge into two pure clauses to exercise
        # the several-gates-on-one-edge form; the edge class is unchanged.
        if cls == "mixed" and self.rng.random() < 0.2:
            ce = self.annotation(self.pick_controls("ce"))
            ac = self.annotation(self.pick_controls("ac"))
            return (ce, ac)
        return (self.annotation(self.pick_controls(cls)),)

    def guarded_leaf(self, cls: str) -> str:
        children = [self.basic(), self.basic()]
        if self.rng.random() < 0.2:
            children.append(self.basic())
        return self.intermediate(children, self.annotations_for(cls))

    def stack_above(self, below: str, cls: str) -> str:
        return self.intermediate([below, self.basic()], self.annotations_for(cls))

    def phase_subtree(self, l1_classes: list[str], rest_classes: list[str]) -> str:
        branches = [self.guarded_leaf(cls) for cls in l1_classes]
        chain = branches[0]
        for cls in rest_classes:
            chain = self.stack_above(chain, cls)
        if len(branches) == 1:
            return chain
        return self.intermediate([chain, *branches[1:]])

    def filler_subtree(self) -> str:
        return self.intermediate([self.basic(), self.basic()])


def _spread(counts: dict[str, int], rng: random.Random) -> list[str]:
    classes = [cls for cls in _CLASSES for _ in range(counts[cls])]
    rng.shuffle(classes)
    return classes


def synthesize_tree(profile: SynthesisProfile) -> FaultTree:
    """Build a valid tree whose :func:`~iftkit.analysis.case_row` equals the profile."""
    problems = profile.violations()
    if problems:
        raise UnsatisfiableProfileError(problems)

    rng = random.Random(profile.seed)
    builder = _Builder(rng)

    p1_l1 = {cls: getattr(profile, f"{cls}_l1p1") for cls in _CLASSES}
    p1_rest = {cls: getattr(profile, f"{cls}_p1") - p1_l1[cls] for cls in _CLASSES}
    out_l1 = {cls: getattr(profile, f"{cls}_l1") - p1_l1[cls] for cls in _CLASSES}
    out_rest = {cls: getattr(profile, f"{cls}_edges")
                - getattr(profile, f"{cls}_p1") - out_l1[cls]
                for cls in _CLASSES}

    in_p1 = sum(getattr(profile, f"{cls}_p1") for cls in _CLASSES)
    anchors_out = sum(out_l1.values())
    rest_out = sum(out_rest.values())

    top_guard_class: str | None = None
    if anchors_out == 0 and rest_out == 1:
        top_guard_class = next(cls for cls in _CLASSES if out_rest[cls] == 1)
        out_rest = {cls: 0 for cls in _CLASSES}
        rest_out = 0

    phase_roots: list[str] = []
    if in_p1 > 0:
        phase_roots.append(builder.phase_subtree(
            _spread(p1_l1, rng), _spread(p1_rest, rng)))
    elif anchors_out + rest_out > 0:
        # An empty phase 1 must still exist so later edges fall outside it.
        phase_roots.append(builder.filler_subtree())
    if anchors_out > 0:
        phase_roots.append(builder.phase_subtree(
            _spread(out_l1, rng), _spread(out_rest, rng)))

    top_children = list(phase_roots)
    while len(top_children) < 2:
        top_children.append(builder.basic())

    top_id = "top"
    top_gate = f"{top_id}::gate"
    builder.nodes[top_id] = EventNode(id=top_id, label="incident occurs",
                                      kind=EventKind.INTERMEDIATE, gate=top_gate)
    builder.nodes[top_gate] = GateNode(id=top_gate, kind=GateKind.AND,
                                       children=tuple(top_children))
    if top_guard_class is not None:
        builder.guards[(top_gate, top_id)] = builder.annotations_for(top_guard_class)

    metadata = CaseMetadata(case_id=profile.case_id, category=profile.category,
                            variant=profile.variant)
    return FaultTree(top=top_id, nodes=builder.nodes, guards=builder.guards,
                     phase_order=tuple(phase_roots), metadata=metadata)
