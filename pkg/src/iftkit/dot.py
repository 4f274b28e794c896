"""Graphviz export for incident fault trees.

One graph node per event and per gate. Shapes follow the usual fault-tree
conventions: boxes for intermediate events, circles for basic events,
diamonds for undeveloped events; gates keep their own silhouettes. Inhibit
annotations are rendered as labels on the gate-to-event edge; sequential
controls are shown as an ordered chain.
"""

from __future__ import annotations

from .model import (
    Composition,
    EventKind,
    EventNode,
    FaultTree,
    GateKind,
    GateNode,
    require_valid,
)

_EVENT_SHAPES = {
    EventKind.INTERMEDIATE: "box",
    EventKind.BASIC: "circle",
    EventKind.UNDEVELOPED: "diamond",
    EventKind.CONDITIONING: "ellipse",
}

_GATE_SHAPES = {
    GateKind.AND: "invhouse",
    GateKind.OR: "invtrapezium",
}


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _guard_label(tree: FaultTree, key: tuple[str, str]) -> str:
    parts = []
    for annotation in tree.guards[key]:
        joiner = " -> " if annotation.composition is Composition.SEQUENTIAL else " || "
        text = joiner.join(str(c) for c in annotation.controls)
        if annotation.condition is not None:
            text += f" [if {annotation.condition}]"
        parts.append(text)
    return "\\n".join(_escape(part) for part in parts)


def export_dot(tree: FaultTree, name: str = "ift") -> str:
    """Render a valid tree as a Graphviz ``digraph`` document."""
    require_valid(tree)
    lines = [f'digraph "{_escape(name)}" {{', "  rankdir=BT;",
             "  node [fontsize=10];"]

    for node in tree.nodes.values():
        if isinstance(node, EventNode):
            shape = _EVENT_SHAPES[node.kind]
            label = node.label
            if node.techniques:
                label += "\n" + ", ".join(node.techniques)
            style = ', style=dashed' if node.kind is EventKind.CONDITIONING else ""
            lines.append(f'  "{node.id}" [shape={shape}, label="{_escape(label)}"{style}];')
        else:
            shape = _GATE_SHAPES[node.kind]
            lines.append(f'  "{node.id}" [shape={shape}, '
                         f'label="{node.kind.value.upper()}"];')

    for node in tree.nodes.values():
        if isinstance(node, GateNode):
            for child_id in node.children:
                lines.append(f'  "{child_id}" -> "{node.id}";')
        elif node.gate is not None:
            key = (node.gate, node.id)
            if key in tree.guards:
                label = _guard_label(tree, key)
                lines.append(f'  "{node.gate}" -> "{node.id}" '
                             f'[label="{label}", arrowhead=tee];')
                for annotation in tree.guards[key]:
                    if annotation.condition is not None:
                        lines.append(f'  "{annotation.condition}" -> "{node.id}" '
                                     "[style=dashed, arrowhead=none];")
            else:
                lines.append(f'  "{node.gate}" -> "{node.id}";')

    lines.append("}")
    return "\n".join(lines) + "\n"
