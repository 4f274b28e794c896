"""Command-line front end: validate, analyze, whatif, export-dot, synth.

Exit codes: 0 success, 1 validation or analysis findings, 2 usage error,
3 I/O error. Output is deterministic: identical inputs and flags produce
byte-identical output, and all renderings of a report derive from the same
in-memory result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import (
    ROW_COUNT_FIELDS,
    ROW_FIELDS,
    CaseAnalysisRow,
    CaseMitigation,
    ClaimedSummary,
    CorpusSummary,
    DiscrepancyNote,
    VariantPattern,
    aggregate_corpus,
    case_row,
    control_frequency,
    load_claims,
    load_rows,
    ransomware_patterns,
)
from .dot import export_dot
from .dsl import parse_bytes, serialize
from .model import ALL_CONTROLS, Category, Control, FaultTree, guarded_edges
from .synth import SynthesisProfile, UnsatisfiableProfileError, synthesize_tree
from .whatif import Deployment, earliest_block, evaluate, minimal_inhibiting_sets

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3

REPORT_HEADERS = (
    "Case", "Category", "Total Edges", "CE Edges", "AC Edges", "CE+AC Edges",
    "CE at L1", "AC at L1", "CE+AC at L1",
    "CE at P1", "AC at P1", "CE+AC at P1",
    "CE at L1P1", "AC at L1P1", "CE+AC at L1P1",
)


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _CliError(f"{path}: {exc.strerror or exc}", EXIT_IO) from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"{path}: {exc.strerror or exc}", EXIT_IO) from exc


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"{out}: {exc.strerror or exc}", EXIT_IO) from exc


def _parse_tree_file(path: str) -> FaultTree:
    data = _read_bytes(path)
    outcome = parse_bytes(data, filename=path)
    if outcome.tree is None:
        for error in outcome.errors:
            print(error, file=sys.stderr)
        raise _CliError(f"{path}: {len(outcome.errors)} error(s)", EXIT_FINDINGS)
    return outcome.tree


# --- report bundle -----------------------------------------------------------


@dataclass
class ReportBundle:
    """Everything one analysis run produced, rendered on demand."""

    rows: list[CaseAnalysisRow]
    summary: CorpusSummary
    frequencies: dict[Control, int] | None
    patterns: dict[str, VariantPattern] | None

    @property
    def notes(self) -> list[DiscrepancyNote]:
        return self.summary.notes


def build_bundle(trees: list[FaultTree] | None,
                 rows: list[CaseAnalysisRow] | None,
                 claimed: ClaimedSummary | None) -> ReportBundle:
    if trees is not None:
        rows = [case_row(tree) for tree in trees]
        frequencies = control_frequency(trees)
        patterns = ransomware_patterns(trees)
    else:
        assert rows is not None
        frequencies = None
        patterns = None
    summary = aggregate_corpus(rows, claimed)
    return ReportBundle(rows=rows, summary=summary,
                        frequencies=frequencies, patterns=patterns)


def _summary_lines(summary: CorpusSummary) -> list[tuple[str, int, int, int, int, int | None]]:
    p1 = summary.p1_cases
    l1p1 = summary.l1p1_cases
    return [
        ("edge", summary.edge_totals.total, summary.edge_totals.ce,
         summary.edge_totals.ac, summary.edge_totals.mixed, None),
        ("level", summary.l1_totals.total, summary.l1_totals.ce,
         summary.l1_totals.ac, summary.l1_totals.mixed, None),
        ("phase", summary.case_count, p1[CaseMitigation.CE],
         p1[CaseMitigation.AC], p1[CaseMitigation.MIXED],
         p1[CaseMitigation.UNCLASSIFIABLE]),
        ("level_phase", summary.case_count, l1p1[CaseMitigation.CE],
         l1p1[CaseMitigation.AC], l1p1[CaseMitigation.MIXED],
         l1p1[CaseMitigation.UNCLASSIFIABLE]),
    ]


def render_table(bundle: ReportBundle) -> str:
    out: list[str] = []
    matrix = [REPORT_HEADERS]
    for row in bundle.rows:
        matrix.append((row.case_id, row.category.value,
                       *(str(n) for n in row.counts())))
    widths = [max(len(r[i]) for r in matrix) for i in range(len(REPORT_HEADERS))]
    for r in matrix:
        out.append("  ".join(str(cell).ljust(widths[i])
                             for i, cell in enumerate(r)).rstrip())

    out.append("")
    out.append("Summary")
    for name, total, ce, ac, mixed, unclassifiable in _summary_lines(bundle.summary):
        line = f"  {name:<12} total={total:<4} CE={ce:<4} AC={ac:<4} CE+AC={mixed:<4}"
        if unclassifiable:
            line += f" unclassifiable={unclassifiable}"
        out.append(line.rstrip())

    if bundle.frequencies is not None:
        out.append("")
        out.append("Control frequency (incidents)")
        for control in ALL_CONTROLS:
            out.append(f"  {str(control):<28} {bundle.frequencies[control]}")

    if bundle.patterns:
        out.append("")
        out.append("Ransomware patterns")
        for variant, pattern in bundle.patterns.items():
            out.append(f"  {variant} ({pattern.cases} case(s))")
            for usage in pattern.most_used_ce:
                mark = " (L1)" if usage.at_level_one else ""
                out.append(f"    CE    {usage.control}{mark} x{usage.incidents}")
            for usage in pattern.most_used_ac:
                mark = " (L1)" if usage.at_level_one else ""
                out.append(f"    AC    {usage.control}{mark} x{usage.incidents}")
            for pair in pattern.most_used_mixed:
                mark = " (L1)" if pair.at_level_one else ""
                out.append(f"    CE+AC {pair.ce} + {pair.ac}{mark} x{pair.incidents}")

    out.append("")
    if bundle.notes:
        out.append("Audit findings")
        for note in bundle.notes:
            out.append(f"  {note.location}: {note.message}")
    else:
        out.append("Audit findings: none")
    return "\n".join(out) + "\n"


def render_csv(bundle: ReportBundle) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    out.write("# rows\n")
    writer.writerow(ROW_FIELDS)
    for row in bundle.rows:
        writer.writerow([row.case_id, row.category.value, *row.counts()])
    out.write("# summary\n")
    writer.writerow(("analysis", "total", "ce", "ac", "mixed", "unclassifiable"))
    for name, total, ce, ac, mixed, unclassifiable in _summary_lines(bundle.summary):
        writer.writerow((name, total, ce, ac, mixed,
                         "" if unclassifiable is None else unclassifiable))
    if bundle.frequencies is not None:
        out.write("# control_frequency\n")
        writer.writerow(("control", "incidents"))
        for control in ALL_CONTROLS:
            writer.writerow((str(control), bundle.frequencies[control]))
    if bundle.patterns is not None:
        out.write("# ransomware_patterns\n")
        writer.writerow(("variant", "kind", "controls", "incidents", "level_one"))
        for variant, pattern in bundle.patterns.items():
            for usage in pattern.most_used_ce:
                writer.writerow((variant, "ce", str(usage.control),
                                 usage.incidents, str(usage.at_level_one).lower()))
            for usage in pattern.most_used_ac:
                writer.writerow((variant, "ac", str(usage.control),
                                 usage.incidents, str(usage.at_level_one).lower()))
            for pair in pattern.most_used_mixed:
                writer.writerow((variant, "mixed", f"{pair.ce}+{pair.ac}",
                                 pair.incidents, str(pair.at_level_one).lower()))
    out.write("# audit\n")
    writer.writerow(("location", "claimed", "recomputed", "message"))
    for note in bundle.notes:
        writer.writerow((note.location,
                         "" if note.claimed is None else note.claimed,
                         "" if note.recomputed is None else note.recomputed,
                         note.message))
    return out.getvalue()


def render_json(bundle: ReportBundle) -> str:
    summary_obj = {}
    for name, total, ce, ac, mixed, unclassifiable in _summary_lines(bundle.summary):
        entry = {"total": total, "ce": ce, "ac": ac, "mixed": mixed}
        if unclassifiable is not None:
            entry["unclassifiable"] = unclassifiable
        summary_obj[name] = entry
    payload = {
        "rows": [
            {"case_id": row.case_id, "category": row.category.value,
             **{name: getattr(row, name) for name in ROW_COUNT_FIELDS}}
            for row in bundle.rows
        ],
        "summary": summary_obj,
        "categories": {cat.value: bundle.summary.category_counts[cat]
                       for cat in Category},
        "control_frequency": (
            None if bundle.frequencies is None
            else {str(c): bundle.frequencies[c] for c in ALL_CONTROLS}),
        "ransomware_patterns": (
            None if bundle.patterns is None else {
                variant: {
                    "cases": pattern.cases,
                    "most_used_ce": [
                        {"control": str(u.control), "incidents": u.incidents,
                         "level_one": u.at_level_one}
                        for u in pattern.most_used_ce],
                    "most_used_ac": [
                        {"control": str(u.control), "incidents": u.incidents,
                         "level_one": u.at_level_one}
                        for u in pattern.most_used_ac],
                    "most_used_mixed": [
                        {"ce": str(p.ce), "ac": str(p.ac),
                         "incidents": p.incidents, "level_one": p.at_level_one}
                        for p in pattern.most_used_mixed],
                }
                for variant, pattern in bundle.patterns.items()
            }),
        "audit": [
            {"location": note.location, "claimed": note.claimed,
             "recomputed": note.recomputed, "message": note.message}
            for note in bundle.notes
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


_RENDERERS = {"table": render_table, "csv": render_csv, "json": render_json}


# --- commands ----------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    status = EXIT_OK
    for path in args.paths:
        try:
            data = _read_bytes(path)
        except _CliError as exc:
            print(exc, file=sys.stderr)
            status = max(status, EXIT_IO)
            continue
        outcome = parse_bytes(data, filename=path)
        if outcome.ok:
            print(f"{path}: ok")
        else:
            for error in outcome.errors:
                print(error, file=sys.stderr)
            status = max(status, EXIT_FINDINGS)
    return status


def _load_manifest(path: str) -> tuple[list[str], str | None]:
    base = Path(path).parent
    tree_paths: list[str] = []
    claims_path: str | None = None
    for raw in _read_text(path).splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("claims:"):
            claims_path = str(base / line.split(":", 1)[1].strip())
            continue
        tree_paths.append(str(base / line))
    return tree_paths, claims_path


def cmd_analyze(args: argparse.Namespace) -> int:
    if (args.manifest is None) == (args.rows is None):
        raise _CliError("provide a manifest or --rows, not both", EXIT_USAGE)

    claims_path = args.claims
    trees: list[FaultTree] | None = None
    rows: list[CaseAnalysisRow] | None = None

    if args.manifest is not None:
        tree_paths, manifest_claims = _load_manifest(args.manifest)
        if not tree_paths:
            raise _CliError(f"{args.manifest}: manifest lists no files", EXIT_USAGE)
        claims_path = claims_path or manifest_claims
        trees = [_parse_tree_file(path) for path in tree_paths]
    else:
        try:
            rows = load_rows(_read_text(args.rows))
        except ValueError as exc:
            raise _CliError(f"{args.rows}: {exc}", EXIT_USAGE) from exc

    claimed = None
    if claims_path is not None:
        try:
            claimed = load_claims(_read_text(claims_path))
        except ValueError as exc:
            raise _CliError(f"{claims_path}: {exc}", EXIT_USAGE) from exc

    bundle = build_bundle(trees, rows, claimed)
    _write_output(_RENDERERS[args.format](bundle), args.out)
    return EXIT_FINDINGS if bundle.notes else EXIT_OK


def cmd_whatif(args: argparse.Namespace) -> int:
    tree = _parse_tree_file(args.tree)
    try:
        deployment = Deployment.from_text(_read_text(args.deployment))
    except ValueError as exc:
        raise _CliError(f"{args.deployment}: {exc}", EXIT_USAGE) from exc

    outcome = evaluate(tree, deployment)
    by_key = {e.key: e for e in guarded_edges(tree)}
    blocked = [e for e in by_key.values() if e.key in outcome.blocked_edges]
    earliest = earliest_block(tree, deployment)
    sets = None
    if args.minimal_sets is not None:
        sets = [sorted(str(c) for c in s)
                for s in minimal_inhibiting_sets(tree, args.minimal_sets)]

    deployed = sorted(str(c) for c in deployment.controls)
    if args.format == "json":
        payload = {
            "deployed": deployed,
            "top_occurs": outcome.top_occurs,
            "blocked_edges": [
                {"source": e.source, "destination": e.destination,
                 "level": e.level, "phase": e.phase} for e in blocked],
            "earliest_block": (None if earliest is None
                               else {"phase": earliest[0], "level": earliest[1]}),
            "minimal_inhibiting_sets": sets,
        }
        _write_output(json.dumps(payload, indent=2) + "\n", args.out)
    elif args.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("key", "value"))
        writer.writerow(("deployed", " ".join(deployed)))
        writer.writerow(("top_occurs", str(outcome.top_occurs).lower()))
        writer.writerow(("blocked_edges",
                         " ".join(f"{e.source}->{e.destination}" for e in blocked)))
        writer.writerow(("earliest_block",
                         "" if earliest is None else f"P{earliest[0]}/L{earliest[1]}"))
        if sets is not None:
            for i, combo in enumerate(sets, start=1):
                writer.writerow((f"minimal_set_{i}", " ".join(combo)))
        _write_output(out.getvalue(), args.out)
    else:
        lines = [f"deployed: {', '.join(deployed) if deployed else '(none)'}"]
        lines.append("top event occurs" if outcome.top_occurs
                     else "top event blocked")
        if blocked:
            lines.append("blocked edges:")
            for e in blocked:
                phase = f"P{e.phase}" if e.phase is not None else "no phase"
                lines.append(f"  {e.source} -> {e.destination} (L{e.level}, {phase})")
        else:
            lines.append("blocked edges: none")
        if earliest is not None:
            lines.append(f"earliest block: phase {earliest[0]}, level {earliest[1]}")
        else:
            lines.append("earliest block: none")
        if sets is not None:
            lines.append(f"minimal inhibiting sets (size <= {args.minimal_sets}):")
            if not sets:
                lines.append("  none")
            for combo in sets:
                lines.append("  {" + ", ".join(combo) + "}")
        _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_export_dot(args: argparse.Namespace) -> int:
    tree = _parse_tree_file(args.tree)
    _write_output(export_dot(tree, name=tree.metadata.case_id), args.out)
    return EXIT_OK


def _load_profile(path: str, seed: int | None) -> SynthesisProfile:
    text = _read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise _CliError(f"{path}: profile file is empty", EXIT_USAGE)
    missing = [name for name in ROW_FIELDS if name not in reader.fieldnames]
    if missing:
        raise _CliError(f"{path}: missing columns: {', '.join(missing)}", EXIT_USAGE)
    records = list(reader)
    if len(records) != 1:
        raise _CliError(f"{path}: profile file must contain exactly one row",
                        EXIT_USAGE)
    record = records[0]
    try:
        counts = {name: int(record[name]) for name in ROW_COUNT_FIELDS}
        category = Category(record["category"])
    except ValueError as exc:
        raise _CliError(f"{path}: {exc}", EXIT_USAGE) from exc
    if seed is None:
        seed = int(record["seed"]) if record.get("seed") else 0
    variant = record.get("variant") or None
    return SynthesisProfile(case_id=record["case_id"], category=category,
                            variant=variant, seed=seed, **counts)


def cmd_synth(args: argparse.Namespace) -> int:
    profile = _load_profile(args.profile, args.seed)
    try:
        tree = synthesize_tree(profile)
    except UnsatisfiableProfileError as exc:
        for violation in exc.violations:
            print(f"unsatisfiable profile: {violation}", file=sys.stderr)
        return EXIT_FINDINGS
    _write_output(serialize(tree), args.out)
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ift",
        description="Model security incidents as fault trees with inhibit "
                    "gates and measure where controls stop them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate model files")
    p_validate.add_argument("paths", nargs="+", metavar="FILE")
    p_validate.set_defaults(func=cmd_validate)

    p_analyze = sub.add_parser("analyze", help="per-case analysis and corpus report")
    p_analyze.add_argument("manifest", nargs="?",
                           help="manifest listing model files (one per line)")
    p_analyze.add_argument("--rows", metavar="CSV",
                           help="aggregate pre-tabulated analysis rows instead")
    p_analyze.add_argument("--claims", metavar="CSV",
                           help="claimed reference table to audit against")
    p_analyze.add_argument("--format", choices=("csv", "json", "table"),
                           default="table")
    p_analyze.add_argument("--out", metavar="PATH")
    p_analyze.set_defaults(func=cmd_analyze)

    p_whatif = sub.add_parser("whatif", help="evaluate a control deployment")
    p_whatif.add_argument("tree", metavar="TREE")
    p_whatif.add_argument("deployment", metavar="DEPLOYMENT",
                          help="file with one FAMILY.Name control per line")
    p_whatif.add_argument("--minimal-sets", type=int, metavar="N",
                          help="also list minimal inhibiting sets up to size N")
    p_whatif.add_argument("--format", choices=("csv", "json", "table"),
                          default="table")
    p_whatif.add_argument("--out", metavar="PATH")
    p_whatif.set_defaults(func=cmd_whatif)

    p_dot = sub.add_parser("export-dot", help="render a model as Graphviz DOT")
    p_dot.add_argument("tree", metavar="TREE")
    p_dot.add_argument("--out", metavar="PATH")
    p_dot.set_defaults(func=cmd_export_dot)

    p_synth = sub.add_parser("synth", help="synthesize a model from target counts")
    p_synth.add_argument("profile", metavar="CSV",
                         help="profile row with the analysis-table columns")
    p_synth.add_argument("--seed", type=int, metavar="U64")
    p_synth.add_argument("--out", metavar="PATH")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"ift: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
