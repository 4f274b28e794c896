"""Core data model for incident fault trees.

An incident fault tree reconstructs a security breach as events combined by
AND/OR gates under a single top event. Mitigations are attached as inhibit
annotations on the link between a gate and the intermediate event it feeds;
that link is the *guarded edge*, the unit everything else counts.

Structural conventions:

* every intermediate event has exactly one causal gate; basic, undeveloped
  and conditioning events are leaves,
* gates connect events only (a gate directly under a gate is rejected),
* each node has a single parent, so the tree really is a tree,
* all inhibit annotations on one (gate, event) pair collapse into a single
  guarded edge,
* the *level* of a guarded edge is its height in the nesting of guarded
  edges: 1 if no guarded edge exists below its source gate, otherwise one
  more than the deepest guarded edge beneath,
* *phases* are the subtrees rooted at the top event's direct intermediate
  children, in the declared chronological order; the guard on the edge into
  the top event itself belongs to no phase.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union


class EventKind(Enum):
    BASIC = "basic"
    INTERMEDIATE = "intermediate"
    UNDEVELOPED = "undeveloped"
    CONDITIONING = "conditioning"


class GateKind(Enum):
    AND = "and"
    OR = "or"


class Composition(Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"


class ControlFamily(Enum):
    CE = "CE"
    AC = "AC"


class Category(Enum):
    RANSOMWARE = "Ransomware"
    PHISHING = "Phishing"
    MALWARE_EXECUTION = "MalwareExecution"
    CV_EXPLOITATION = "CVExploitation"


CE_CONTROL_NAMES = (
    "Firewall",
    "SecureConfiguration",
    "UserAccessControl",
    "MalwareProtection",
    "SecurityUpdateManagement",
)

AC_CONTROL_NAMES = (
    "Encryption",
    "Backup",
    "Policy",
    "Education",
    "LoggingMonitoring",
)

CONTROL_NAMES = {
    ControlFamily.CE: CE_CONTROL_NAMES,
    ControlFamily.AC: AC_CONTROL_NAMES,
}

TECHNIQUE_PATTERN = re.compile(r"^T\d{4}(\.\d{3})?$")


class InvalidTreeError(ValueError):
    """Raised when an operation is given a tree that fails validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = "; ".join(v.message for v in report.violations[:3])
        more = len(report.violations) - 3
        if more > 0:
            lines += f"; and {more} more"
        super().__init__(f"tree is not valid: {lines}")


class MissingEdgeError(LookupError):
    """Raised when a guarded edge does not belong to the given tree."""


@dataclass(frozen=True)
class Control:
    """A named security control from one of the two closed taxonomies."""

    family: ControlFamily
    name: str

    def __post_init__(self):
        if self.name not in CONTROL_NAMES[self.family]:
            raise ValueError(
                f"unknown {self.family.value} control name: {self.name!r}"
            )

    def __str__(self) -> str:
        return f"{self.family.value}.{self.name}"

    @classmethod
    def parse(cls, text: str) -> "Control":
        """Parse the dotted ``FAMILY.Name`` form, e.g. ``CE.Firewall``."""
        family_text, sep, name = text.partition(".")
        if not sep:
            raise ValueError(f"control must use FAMILY.Name form: {text!r}")
        try:
            family = ControlFamily(family_text)
        except ValueError:
            raise ValueError(f"unknown control family: {family_text!r}") from None
        return cls(family, name)


def control_sort_key(control: Control) -> tuple[str, str]:
    return (control.family.value, control.name)


ALL_CONTROLS = tuple(
    Control(family, name)
    for family in (ControlFamily.CE, ControlFamily.AC)
    for name in CONTROL_NAMES[family]
)


@dataclass(frozen=True)
class EventNode:
    """A discrete event. Intermediate events carry a causal gate id."""

    id: str
    label: str
    kind: EventKind
    techniques: tuple[str, ...] = ()
    gate: str | None = None

    def __post_init__(self):
        for tag in self.techniques:
            if not TECHNIQUE_PATTERN.match(tag):
                raise ValueError(f"malformed technique tag: {tag!r}")


@dataclass(frozen=True)
class GateNode:
    """Conjunction or disjunction of the child events that cause the parent."""

    id: str
    kind: GateKind
    children: tuple[str, ...]


Node = Union[EventNode, GateNode]


@dataclass(frozen=True)
class InhibitAnnotation:
    """Controls that stop the destination event when the edge's gate fires.

    Parallel controls act independently (any one suffices); sequential
    controls form an ordered chain that only works as a whole.
    """

    controls: tuple[Control, ...]
    composition: Composition = Composition.PARALLEL
    condition: str | None = None

    def __post_init__(self):
        if not self.controls:
            raise ValueError("inhibit annotation requires at least one control")
        if self.composition is Composition.SEQUENTIAL and len(self.controls) < 2:
            raise ValueError("sequential composition requires at least two controls")


@dataclass(frozen=True)
class CaseMetadata:
    case_id: str
    category: Category
    variant: str | None = None
    impacts: tuple[str, ...] = ()


@dataclass(frozen=True)
class GuardedEdge:
    """A (gate, intermediate event) link carrying one or more annotations."""

    source: str
    destination: str
    annotations: tuple[InhibitAnnotation, ...]
    level: int
    phase: int | None

    @property
    def controls(self) -> tuple[Control, ...]:
        """All controls on the edge, deduplicated, in first-seen order."""
        seen: dict[Control, None] = {}
        for annotation in self.annotations:
            for control in annotation.controls:
                seen.setdefault(control)
        return tuple(seen)

    @property
    def key(self) -> tuple[str, str]:
        return (self.source, self.destination)


@dataclass
class FaultTree:
    """A full incident model: nodes, guards, phase ordering and metadata.

    ``nodes`` holds events and gates keyed by id; insertion order is
    document order and drives the deterministic ordering of analyses.
    ``guards`` maps a (gate id, event id) pair to the annotations on that
    edge. ``phase_order`` lists the top event's direct intermediate children
    chronologically.
    """

    top: str
    nodes: dict[str, Node]
    guards: dict[tuple[str, str], tuple[InhibitAnnotation, ...]]
    phase_order: tuple[str, ...]
    metadata: CaseMetadata

    def event(self, node_id: str) -> EventNode:
        node = self.nodes[node_id]
        if not isinstance(node, EventNode):
            raise KeyError(f"{node_id} is a gate, not an event")
        return node

    def gate(self, node_id: str) -> GateNode:
        node = self.nodes[node_id]
        if not isinstance(node, GateNode):
            raise KeyError(f"{node_id} is an event, not a gate")
        return node


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subject: str | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, subject: str | None = None) -> None:
        self.violations.append(Violation(code, message, subject))


def validate_tree(tree: FaultTree) -> ValidationReport:
    """Check every structural rule; violations are data, not failures."""
    report = ValidationReport()
    nodes = tree.nodes

    for node_id, node in nodes.items():
        if node.id != node_id:
            report.add("id-mismatch", f"node stored under {node_id!r} has id {node.id!r}", node_id)

    top = nodes.get(tree.top)
    if top is None:
        report.add("missing-root", f"top event {tree.top!r} is not declared", tree.top)
        return report
    if not isinstance(top, EventNode) or top.kind is not EventKind.INTERMEDIATE:
        report.add("root-kind", "root must be an intermediate event", tree.top)

    condition_refs: set[str] = set()
    for annotations in tree.guards.values():
        for annotation in annotations:
            if annotation.condition is not None:
                condition_refs.add(annotation.condition)

    # Leaf rules, gate arity, gate nesting, dangling references.
    for node in nodes.values():
        if isinstance(node, EventNode):
            if node.kind is EventKind.INTERMEDIATE:
                if node.gate is None:
                    report.add("leafless-intermediate",
                               f"intermediate event {node.id!r} has no causal gate", node.id)
                elif node.gate not in nodes:
                    report.add("dangling-gate",
                               f"event {node.id!r} references missing gate {node.gate!r}", node.id)
                elif not isinstance(nodes[node.gate], GateNode):
                    report.add("gate-kind",
                               f"event {node.id!r} uses non-gate {node.gate!r} as its gate", node.id)
            elif node.gate is not None:
                report.add("leaf-with-children",
                           f"{node.kind.value} event {node.id!r} cannot have a causal gate", node.id)
        else:
            if len(node.children) < 2:
                report.add("gate-arity",
                           f"gate {node.id!r} must have at least two children", node.id)
            for child_id in node.children:
                child = nodes.get(child_id)
                if child is None:
                    report.add("dangling-child",
                               f"gate {node.id!r} references missing node {child_id!r}", node.id)
                elif isinstance(child, GateNode):
                    report.add("nested-gate",
                               f"gate {child_id!r} nested directly under gate {node.id!r}; "
                               "introduce an intermediate event", child_id)
                elif child.kind is EventKind.CONDITIONING:
                    report.add("conditioning-in-tree",
                               f"conditioning event {child_id!r} cannot appear in the causal tree",
                               child_id)

    # Reachability, single parent, acyclicity: walk the causal structure.
    seen: set[str] = set()
    stack: list[str] = []
    on_stack: set[str] = set()

    def walk(node_id: str) -> None:
        if node_id in on_stack:
            report.add("cycle", f"cycle through {node_id!r}", node_id)
            return
        if node_id in seen:
            report.add("multi-parent",
                       f"node {node_id!r} is referenced by more than one parent", node_id)
            return
        node = nodes.get(node_id)
        if node is None:
            return
        seen.add(node_id)
        on_stack.add(node_id)
        stack.append(node_id)
        if isinstance(node, EventNode):
            if node.gate is not None and node.gate in nodes:
                walk(node.gate)
        else:
            for child_id in node.children:
                if child_id in nodes and not isinstance(nodes[child_id], GateNode):
                    walk(child_id)
        stack.pop()
        on_stack.discard(node_id)

    walk(tree.top)
    for node_id, node in nodes.items():
        if node_id in seen:
            continue
        if isinstance(node, EventNode) and node.kind is EventKind.CONDITIONING:
            if node_id not in condition_refs:
                report.add("orphan-conditioning",
                           f"conditioning event {node_id!r} is not referenced by any guard",
                           node_id)
            continue
        report.add("unreachable", f"node {node_id!r} is not reachable from the root", node_id)

    # Guard placement.
    for (source, destination), annotations in tree.guards.items():
        if not annotations:
            report.add("empty-guard",
                       f"edge ({source!r}, {destination!r}) carries no annotations", destination)
        gate = nodes.get(source)
        dest = nodes.get(destination)
        if gate is None or not isinstance(gate, GateNode):
            report.add("guard-source", f"guard source {source!r} is not a gate", source)
            continue
        if dest is None or not isinstance(dest, EventNode):
            report.add("guard-destination",
                       f"guard destination {destination!r} is not an event", destination)
            continue
        if dest.kind is not EventKind.INTERMEDIATE:
            report.add("guard-destination",
                       f"guard destination {destination!r} is not an intermediate event",
                       destination)
        elif dest.gate != source:
            report.add("guard-placement",
                       f"guard on ({source!r}, {destination!r}) does not sit on the "
                       "destination's causal gate", destination)
        for annotation in annotations:
            if annotation.condition is not None:
                cond = nodes.get(annotation.condition)
                if cond is None or not isinstance(cond, EventNode) \
                        or cond.kind is not EventKind.CONDITIONING:
                    report.add("guard-condition",
                               f"guard condition {annotation.condition!r} must reference a "
                               "conditioning event", destination)

    # Phase ordering covers exactly the top event's direct intermediate children.
    expected = set(_phase_roots(tree))
    declared = list(tree.phase_order)
    if len(declared) != len(set(declared)) or set(declared) != expected:
        report.add("phase-order",
                   "phase order must list each of the top event's direct intermediate "
                   "children exactly once", tree.top)

    return report


def require_valid(tree: FaultTree) -> None:
    """Reject trees that fail validation; analyses only accept valid trees."""
    report = validate_tree(tree)
    if not report.ok:
        raise InvalidTreeError(report)


def _phase_roots(tree: FaultTree) -> list[str]:
    top = tree.nodes.get(tree.top)
    if not isinstance(top, EventNode) or top.gate is None:
        return []
    gate = tree.nodes.get(top.gate)
    if not isinstance(gate, GateNode):
        return []
    roots = []
    for child_id in gate.children:
        child = tree.nodes.get(child_id)
        if isinstance(child, EventNode) and child.kind is EventKind.INTERMEDIATE:
            roots.append(child_id)
    return roots


def _subtree_events(tree: FaultTree, event_id: str) -> Iterator[str]:
    """Yield every event id in the subtree rooted at ``event_id``."""
    pending = [event_id]
    while pending:
        current = pending.pop()
        yield current
        node = tree.nodes[current]
        if isinstance(node, EventNode) and node.gate is not None:
            gate = tree.nodes[node.gate]
            if isinstance(gate, GateNode):
                pending.extend(gate.children)


def _edge_levels(tree: FaultTree) -> dict[tuple[str, str], int]:
    """Height of each guarded edge in the nesting of guarded edges."""
    levels: dict[tuple[str, str], int] = {}
    height: dict[str, int] = {}

    def gate_height(gate_id: str) -> int:
        # Deepest guarded edge strictly below this gate; 0 when none.
        if gate_id in height:
            return height[gate_id]
        best = 0
        gate = tree.nodes[gate_id]
        assert isinstance(gate, GateNode)
        for child_id in gate.children:
            child = tree.nodes[child_id]
            if not isinstance(child, EventNode) or child.gate is None:
                continue
            below = gate_height(child.gate)
            if (child.gate, child_id) in tree.guards:
                key = (child.gate, child_id)
                levels[key] = below + 1
                below += 1
            best = max(best, below)
        height[gate_id] = best
        return best

    top = tree.nodes[tree.top]
    assert isinstance(top, EventNode)
    if top.gate is not None:
        below = gate_height(top.gate)
        key = (top.gate, tree.top)
        if key in tree.guards:
            levels[key] = below + 1
    return levels


def _edge_phases(tree: FaultTree) -> dict[tuple[str, str], int]:
    """Phase index for every guarded edge that lives inside a phase subtree."""
    membership: dict[str, int] = {}
    for index, root in enumerate(tree.phase_order, start=1):
        for event_id in _subtree_events(tree, root):
            membership[event_id] = index
    phases: dict[tuple[str, str], int] = {}
    for source, destination in tree.guards:
        index = membership.get(destination)
        if index is not None:
            phases[(source, destination)] = index
    return phases


def guarded_edges(tree: FaultTree) -> list[GuardedEdge]:
    """One edge per annotated (gate, intermediate event) pair, in document order.

    Document order means the order in which destination events were declared.
    """
    require_valid(tree)
    levels = _edge_levels(tree)
    phases = _edge_phases(tree)
    edges = []
    for node_id, node in tree.nodes.items():
        if not isinstance(node, EventNode) or node.gate is None:
            continue
        key = (node.gate, node_id)
        annotations = tree.guards.get(key)
        if not annotations:
            continue
        edges.append(GuardedEdge(
            source=node.gate,
            destination=node_id,
            annotations=tuple(annotations),
            level=levels[key],
            phase=phases.get(key),
        ))
    return edges


def edge_level(tree: FaultTree, edge: GuardedEdge) -> int:
    """Level of ``edge`` within ``tree``; 1 means nothing guarded below it."""
    require_valid(tree)
    key = (edge.source, edge.destination)
    if key not in tree.guards:
        raise MissingEdgeError(f"edge {key} does not belong to this tree")
    return _edge_levels(tree)[key]


def edge_phase(tree: FaultTree, edge: GuardedEdge) -> int | None:
    """Phase of ``edge``, or None for the guard on the edge into the top event."""
    require_valid(tree)
    key = (edge.source, edge.destination)
    if key not in tree.guards:
        raise MissingEdgeError(f"edge {key} does not belong to this tree")
    return _edge_phases(tree).get(key)


def iter_events(tree: FaultTree) -> Iterator[EventNode]:
    for node in tree.nodes.values():
        if isinstance(node, EventNode):
            yield node


def iter_gates(tree: FaultTree) -> Iterator[GateNode]:
    for node in tree.nodes.values():
        if isinstance(node, GateNode):
            yield node


def tree_controls(tree: FaultTree) -> tuple[Control, ...]:
    """Distinct controls appearing on any annotation, in first-seen order."""
    seen: dict[Control, None] = {}
    for annotations in tree.guards.values():
        for annotation in annotations:
            for control in annotation.controls:
                seen.setdefault(control)
    return tuple(seen)
