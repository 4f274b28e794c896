"""iftkit — model security incidents as fault trees with inhibit gates and
measure where controls would have stopped them."""

from .analysis import (
    AnalysisTotals,
    CaseAnalysisRow,
    CaseMitigation,
    ClaimedSummary,
    ControlClass,
    CorpusSummary,
    DiscrepancyNote,
    Scope,
    aggregate_corpus,
    audit_consistency,
    case_mitigation_class,
    case_row,
    classify_controls,
    classify_edge,
    control_frequency,
    load_claims,
    load_rows,
    ransomware_patterns,
)
from .dot import export_dot
from .dsl import (
    ErrorKind,
    ParseError,
    ParseFailure,
    ParseOutcome,
    SourceSpan,
    parse,
    parse_bytes,
    parse_document,
    serialize,
)
from .model import (
    Category,
    CaseMetadata,
    Composition,
    Control,
    ControlFamily,
    EventKind,
    EventNode,
    FaultTree,
    GateKind,
    GateNode,
    GuardedEdge,
    InhibitAnnotation,
    InvalidTreeError,
    ValidationReport,
    Violation,
    edge_level,
    edge_phase,
    guarded_edges,
    validate_tree,
)
from .synth import SynthesisProfile, UnsatisfiableProfileError, synthesize_tree
from .whatif import (
    AttackOutcome,
    ControlUniverseError,
    Deployment,
    earliest_block,
    evaluate,
    minimal_inhibiting_sets,
)

__version__ = "0.1.0"
