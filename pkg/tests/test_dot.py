import re

from iftkit.dot import export_dot
from iftkit.dsl import parse

MINIMAL_DOC = """
case minimal {
  category: Phishing;
  impacts: [];
  tree {
    intermediate top "account compromised"
    or {
      basic guess "password guessed"
      basic reuse "password reused"
    } inhibit parallel [CE.Firewall]
  }
  phases: [];
}
"""


def node_statements(text):
    return re.findall(r'^  "([^"]+)" \[', text, flags=re.MULTILINE)


def test_minimal_tree_renders_four_nodes_and_one_inhibit_decoration():
    dot = export_dot(parse(MINIMAL_DOC))
    assert len(node_statements(dot)) == 4
    assert dot.count("arrowhead=tee") == 1
    assert "CE.Firewall" in dot


def test_fixture_node_count_covers_events_and_gates(bb_tree):
    dot = export_dot(bb_tree, name=bb_tree.metadata.case_id)
    assert len(node_statements(dot)) == len(bb_tree.nodes)


def test_shapes_follow_fault_tree_conventions():
    dot = export_dot(parse(MINIMAL_DOC))
    assert 'shape=box' in dot            # intermediate event
    assert 'shape=circle' in dot         # basic event
    assert 'shape=invtrapezium' in dot   # the OR gate


def test_conditioning_event_rendered_dashed():
    doc = MINIMAL_DOC.replace(
        "inhibit parallel [CE.Firewall]",
        'inhibit parallel [CE.Firewall] if exposed "service reachable"')
    dot = export_dot(parse(doc))
    assert 'style=dashed' in dot
    assert '"exposed" -> "top"' in dot


def test_output_is_deterministic(bb_tree):
    assert export_dot(bb_tree) == export_dot(bb_tree)
