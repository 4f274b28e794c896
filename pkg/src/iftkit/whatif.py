"""Attack outcomes under hypothetical control deployments.

Evaluation is bottom-up and static: basic and undeveloped events occur with
certainty (the incidents happened), AND/OR gates combine their children,
and a guarded event is stopped when any of its inhibit clauses is
satisfied. A parallel clause is satisfied by deploying at least one of its
controls; a sequential clause only by deploying all of them. Deployments
are organisation-wide: a control deployed once covers every edge naming it.

Because satisfaction is monotone in the deployed set, adding controls can
never re-enable the top event, and the blocked-edge set only grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .model import (
    Composition,
    Control,
    EventNode,
    FaultTree,
    GateKind,
    GateNode,
    GuardedEdge,
    control_sort_key,
    guarded_edges,
    tree_controls,
)


class ControlUniverseError(ValueError):
    """Raised when a tree has too many distinct controls to enumerate."""


@dataclass(frozen=True)
class Deployment:
    """The set of controls an organisation has put in place."""

    controls: frozenset[Control]

    @classmethod
    def of(cls, *controls: Control) -> "Deployment":
        return cls(frozenset(controls))

    @classmethod
    def from_text(cls, text: str) -> "Deployment":
        """Parse a deployment file: one ``FAMILY.Name`` per line, ``#`` comments."""
        controls = set()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            controls.add(Control.parse(line))
        return cls(frozenset(controls))

    def with_control(self, control: Control) -> "Deployment":
        return Deployment(self.controls | {control})

    def __contains__(self, control: Control) -> bool:
        return control in self.controls


@dataclass(frozen=True)
class AttackOutcome:
    top_occurs: bool
    blocked_edges: frozenset[tuple[str, str]]
    earliest_blocked_phase: int | None
    lowest_blocked_level: int | None


def _clause_satisfied(clause, deployed: frozenset[Control]) -> bool:
    names = set(clause.controls)
    if clause.composition is Composition.SEQUENTIAL:
        return names <= deployed
    return bool(names & deployed)


def edge_blocked(edge: GuardedEdge, deployment: Deployment) -> bool:
    """True when any inhibit clause on the edge is satisfied."""
    return any(_clause_satisfied(c, deployment.controls) for c in edge.annotations)


class _Evaluator:
    """Pre-resolved structure for evaluating many deployments over one tree."""

    def __init__(self, tree: FaultTree):
        self.edges = guarded_edges(tree)
        self.top = tree.top
        # Events in dependency order: children strictly before parents.
        order: list[EventNode] = []
        visited: set[str] = set()

        def visit(event_id: str) -> None:
            if event_id in visited:
                return
            visited.add(event_id)
            node = tree.nodes[event_id]
            assert isinstance(node, EventNode)
            if node.gate is not None:
                gate = tree.nodes[node.gate]
                assert isinstance(gate, GateNode)
                for child in gate.children:
                    visit(child)
            order.append(node)

        visit(tree.top)
        self.order = order
        self.gate_of = {node.id: tree.nodes[node.gate]
                        for node in order if node.gate is not None}
        clause_index: dict[str, list[tuple[bool, frozenset[Control]]]] = {}
        for edge in self.edges:
            clause_index[edge.destination] = [
                (clause.composition is Composition.SEQUENTIAL,
                 frozenset(clause.controls))
                for clause in edge.annotations]
        self.clauses = clause_index

    def blocked_destinations(self, deployed: frozenset[Control]) -> set[str]:
        blocked = set()
        for destination, clauses in self.clauses.items():
            for sequential, names in clauses:
                satisfied = names <= deployed if sequential else bool(names & deployed)
                if satisfied:
                    blocked.add(destination)
                    break
        return blocked

    def top_occurs(self, deployed: frozenset[Control]) -> bool:
        blocked = self.blocked_destinations(deployed)
        occurs: dict[str, bool] = {}
        for node in self.order:
            if node.gate is None:
                occurs[node.id] = True
                continue
            gate = self.gate_of[node.id]
            if gate.kind is GateKind.AND:
                fired = all(occurs[c] for c in gate.children)
            else:
                fired = any(occurs[c] for c in gate.children)
            occurs[node.id] = fired and node.id not in blocked
        return occurs[self.top]

    def outcome(self, deployed: frozenset[Control]) -> AttackOutcome:
        blocked = self.blocked_destinations(deployed)
        blocked_edges = frozenset(e.key for e in self.edges
                                  if e.destination in blocked)
        phases = [e.phase for e in self.edges
                  if e.destination in blocked and e.phase is not None]
        levels = [e.level for e in self.edges if e.destination in blocked]
        return AttackOutcome(
            top_occurs=self.top_occurs(deployed),
            blocked_edges=blocked_edges,
            earliest_blocked_phase=min(phases) if phases else None,
            lowest_blocked_level=min(levels) if levels else None,
        )


def evaluate(tree: FaultTree, deployment: Deployment) -> AttackOutcome:
    """Outcome of the incident given the deployed controls."""
    return _Evaluator(tree).outcome(deployment.controls)


def earliest_block(tree: FaultTree,
                   deployment: Deployment) -> tuple[int, int] | None:
    """Minimum phase with a blocked edge and the lowest level blocked there.

    Returns None when no in-phase edge is blocked; a blocked guard on the
    edge into the top event belongs to no phase and does not count here.
    """
    evaluator = _Evaluator(tree)
    blocked = evaluator.blocked_destinations(deployment.controls)
    in_phase = [e for e in evaluator.edges
                if e.destination in blocked and e.phase is not None]
    if not in_phase:
        return None
    phase = min(e.phase for e in in_phase)
    level = min(e.level for e in in_phase if e.phase == phase)
    return (phase, level)


def minimal_inhibiting_sets(tree: FaultTree, max_size: int,
                            universe_limit: int = 16) -> list[frozenset[Control]]:
    """All inclusion-minimal control sets of size ≤ ``max_size`` that stop the top event.

    Works by exhaustive subset enumeration over the tree's distinct
    controls, in ascending size, skipping supersets of sets already found;
    the result is sorted by size, then lexicographically. Refuses trees
    whose control universe exceeds ``universe_limit``.
    """
    if max_size < 1:
        raise ValueError("max_size must be a positive integer")
    evaluator = _Evaluator(tree)
    universe = sorted(tree_controls(tree), key=control_sort_key)
    if len(universe) > universe_limit:
        raise ControlUniverseError(
            f"tree names {len(universe)} distinct controls; exhaustive "
            f"enumeration is limited to {universe_limit}")

    found: list[frozenset[Control]] = []
    for size in range(1, min(max_size, len(universe)) + 1):
        for combo in combinations(universe, size):
            candidate = frozenset(combo)
            if any(existing <= candidate for existing in found):
                continue
            if not evaluator.top_occurs(candidate):
                found.append(candidate)
    found.sort(key=lambda s: (len(s), sorted(control_sort_key(c) for c in s)))
    return found
