import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iftkit.dsl import (
    ErrorKind,
    ParseFailure,
    parse,
    parse_bytes,
    parse_document,
    serialize,
)
from iftkit.model import Composition, EventKind
from iftkit.synth import synthesize_tree

from conftest import random_satisfiable_profile

MINIMAL_DOC = """\
case minimal {
  category: Phishing;
  impacts: [];
  tree {
    intermediate top "account compromised"
    or {
      basic guess "password guessed"
      basic reuse "password reused from a breach"
    } inhibit parallel [CE.Firewall]
  }
  phases: [];
}
"""


def test_empty_document_reports_missing_case_header():
    outcome = parse_document("")
    assert outcome.tree is None
    assert any(e.kind is ErrorKind.SYNTACTIC and "missing case header" in e.message
               for e in outcome.errors)


def test_minimal_document_shapes():
    tree = parse(MINIMAL_DOC)
    assert len(tree.nodes) == 4  # three events plus one gate
    assert len(tree.guards) == 1
    assert tree.metadata.case_id == "minimal"
    assert tree.phase_order == ()


def test_minimal_round_trip_and_idempotence():
    tree = parse(MINIMAL_DOC)
    text = serialize(tree)
    again = parse(text)
    assert again == tree
    assert serialize(again) == text


def test_fixture_round_trip(bb_tree):
    text = serialize(bb_tree)
    assert parse(text) == bb_tree
    assert serialize(parse(text)) == text


def test_error_recovery_reports_multiple_errors():
    doc = """
    case broken {
      category: Phishing;
      impacts: [];
      tree {
        intermediate top "t"
        or {
          basic dup "one"
          basic dup "two"
        } inhibit [CE.Bogus]
      }
      phases: [];
    }
    """
    outcome = parse_document(doc)
    assert outcome.tree is None
    messages = [e.message for e in outcome.errors]
    assert any("duplicate identifier 'dup'" in m for m in messages)
    assert any("unknown CE control name" in m for m in messages)
    assert len(outcome.errors) >= 2


def test_semantic_error_spans_point_at_the_identifier():
    doc = ('case s {\n'
           '  category: Phishing;\n'
           '  impacts: [];\n'
           '  tree {\n'
           '    intermediate top "t"\n'
           '    or { basic a "a", basic b "b" } inhibit [CE.Nope]\n'
           '  }\n'
           '  phases: [];\n'
           '}\n')
    outcome = parse_document(doc, filename="s.ift")
    (error,) = [e for e in outcome.errors if e.kind is ErrorKind.SEMANTIC]
    assert error.span.file == "s.ift"
    assert error.span.line == 6
    # Column of the "CE" token inside the control list.
    assert doc.splitlines()[5][error.span.column - 1:].startswith("CE.Nope")


def test_unknown_category_is_semantic():
    doc = MINIMAL_DOC.replace("Phishing", "Vishing")
    outcome = parse_document(doc)
    assert any(e.kind is ErrorKind.SEMANTIC and "unknown category" in e.message
               for e in outcome.errors)


def test_sequential_clause_with_one_control_is_semantic():
    doc = MINIMAL_DOC.replace("inhibit parallel [CE.Firewall]",
                              "inhibit sequential [CE.Firewall]")
    outcome = parse_document(doc)
    assert any("sequential composition requires at least two controls" in e.message
               for e in outcome.errors)


def test_malformed_tag_is_semantic():
    doc = MINIMAL_DOC.replace('basic guess "password guessed"',
                              'basic guess "password guessed" tags: T12')
    outcome = parse_document(doc)
    assert any(e.kind is ErrorKind.SEMANTIC and "malformed technique tag" in e.message
               for e in outcome.errors)


def test_unterminated_string_is_lexical():
    outcome = parse_document('case x {\n  category: Phishing\n  variant: "oops;\n}')
    assert any(e.kind is ErrorKind.LEXICAL and "unterminated string" in e.message
               for e in outcome.errors)


def test_stray_character_is_lexical():
    outcome = parse_document(MINIMAL_DOC + "\x01")
    assert any(e.kind is ErrorKind.LEXICAL for e in outcome.errors)


def test_basic_event_with_gate_is_semantic():
    doc = """
    case leafy {
      category: Phishing;
      impacts: [];
      tree {
        intermediate top "t"
        or {
          basic a "a"
          and { basic b "b", basic c "c" }
          basic d "d"
        }
      }
      phases: [];
    }
    """
    outcome = parse_document(doc)
    assert any("leaves and cannot have a gate" in e.message for e in outcome.errors)


def test_case_id_may_be_quoted():
    doc = MINIMAL_DOC.replace("case minimal", 'case "04"')
    tree = parse(doc)
    assert tree.metadata.case_id == "04"
    assert parse(serialize(tree)) == tree


def test_conditioning_event_round_trips():
    doc = MINIMAL_DOC.replace(
        "inhibit parallel [CE.Firewall]",
        'inhibit parallel [CE.Firewall] if exposed "service reachable from outside"')
    tree = parse(doc)
    (annotations,) = tree.guards.values()
    assert annotations[0].condition == "exposed"
    assert tree.nodes["exposed"].kind is EventKind.CONDITIONING
    assert parse(serialize(tree)) == tree


def test_composition_defaults_to_parallel():
    doc = MINIMAL_DOC.replace("inhibit parallel [CE.Firewall]",
                              "inhibit [CE.Firewall]")
    tree = parse(doc)
    (annotations,) = tree.guards.values()
    assert annotations[0].composition is Composition.PARALLEL


def test_parse_raises_with_all_errors():
    with pytest.raises(ParseFailure) as excinfo:
        parse("case x {")
    assert excinfo.value.errors


def test_synthesized_trees_round_trip_by_the_hundred():
    rng = random.Random(99)
    for i in range(100):
        tree = synthesize_tree(random_satisfiable_profile(rng, f"d{i}"))
        text = serialize(tree)
        assert parse(text) == tree
        assert serialize(parse(text)) == text


def test_pathological_nesting_is_an_error_not_a_crash():
    depth = 500
    doc = ("case deep {\n  category: Phishing;\n  impacts: [];\n  tree {\n"
           + "".join(f'intermediate e{i} "x" and {{\n' for i in range(depth))
           + 'basic leaf "l"\nbasic leaf2 "m"\n'
           + "}\n" * depth
           + "  }\n  phases: [];\n}\n")
    outcome = parse_document(doc)
    assert outcome.tree is None
    assert any("nesting exceeds" in e.message for e in outcome.errors)


@settings(max_examples=200)
@given(st.binary(max_size=400))
def test_parse_bytes_is_total(data):
    outcome = parse_bytes(data)
    assert outcome.tree is None or not outcome.errors


@settings(max_examples=200)
@given(st.text(max_size=400))
def test_parse_document_is_total(text):
    outcome = parse_document(text)
    if outcome.tree is None:
        assert outcome.errors
