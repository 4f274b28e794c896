"""Bundled reference data: one fully modelled incident, plus a 45-case
reference table of analysis counts together with the summary values claimed
for it (the claims do not all survive recomputation; the auditor reports
each mismatch)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..analysis import CaseAnalysisRow, ClaimedSummary, load_claims, load_rows
from ..dsl import parse
from ..model import FaultTree


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture file."""
    return Path(str(resources.files(__package__).joinpath(name)))


def fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def black_basta_tree() -> FaultTree:
    """The bundled ransomware incident model, parsed and validated."""
    return parse(fixture_text("black_basta.ift"), filename="black_basta.ift")


def reference_rows() -> list[CaseAnalysisRow]:
    """The bundled 45-case reference table, verbatim."""
    return load_rows(fixture_text("reference_rows.csv"))


def claimed_summary() -> ClaimedSummary:
    """The summary values claimed for the reference table, used as audit input."""
    return load_claims(fixture_text("claimed_summary.csv"))
