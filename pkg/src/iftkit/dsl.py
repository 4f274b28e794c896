"""Textual format for authoring incident fault trees.

The format is line-oriented with braces for nesting::

    case qakbot17 {
      category: Phishing;
      variant: "QakBot";
      impacts: ["Credential theft"];
      tree {
        intermediate breach "Workstation compromised" tags: T1566.002
        or {
          basic click "User follows link in a crafted email"
          basic macro "Malicious macro executes"
        } inhibit parallel [CE.MalwareProtection, AC.Education]
      }
      phases: [];
    }

A gate may carry several ``inhibit`` clauses; they all guard the same edge.
``inhibit`` takes an optional composition keyword (``parallel`` is the
default) and an optional ``if <id> "<label>"`` suffix declaring the
conditioning event for the annotation. Identifiers are ASCII alphanumerics
plus underscore; input is UTF-8.

Parsing never raises on malformed input: it collects every diagnosable
error (lexical, syntactic, semantic) with source spans and keeps going.
A tree is returned only when the document is completely clean, and it has
already passed validation. Parser and serializer share no state and are
safe to use concurrently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .model import (
    CaseMetadata,
    Category,
    Composition,
    Control,
    EventKind,
    EventNode,
    FaultTree,
    GateKind,
    GateNode,
    InhibitAnnotation,
    Node,
    require_valid,
    validate_tree,
)

EVENT_KEYWORDS = {
    "intermediate": EventKind.INTERMEDIATE,
    "basic": EventKind.BASIC,
    "undeveloped": EventKind.UNDEVELOPED,
}

GATE_KEYWORDS = {"and": GateKind.AND, "or": GateKind.OR}

IDENT_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

MAX_NESTING = 64  # event/gate alternations; far beyond any real incident model


class ErrorKind(Enum):
    LEXICAL = "lexical"
    SYNTACTIC = "syntactic"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    kind: ErrorKind

    def __str__(self) -> str:
        return f"{self.span}: {self.kind.value}: {self.message}"


class ParseFailure(ValueError):
    """Raised by :func:`parse` when a document has any errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        summary = "; ".join(str(e) for e in errors[:3])
        more = len(errors) - 3
        if more > 0:
            summary += f"; and {more} more"
        super().__init__(summary)


@dataclass
class ParseOutcome:
    """Either a validated tree or the full list of diagnostics."""

    tree: FaultTree | None
    errors: list[ParseError]

    @property
    def ok(self) -> bool:
        return self.tree is not None and not self.errors


# --- lexer -----------------------------------------------------------------

_PUNCT = "{}[]:;,."


@dataclass(frozen=True)
class _Token:
    kind: str          # "ident", "string", "number", one of _PUNCT, or "eof"
    text: str
    line: int
    column: int


def _lex(text: str, filename: str, errors: list[ParseError]) -> list[_Token]:
    tokens: list[_Token] = []
    line, column = 1, 1
    i, n = 0, len(text)

    def span() -> SourceSpan:
        return SourceSpan(filename, line, column)

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            column += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, line, column))
            i += 1
            column += 1
            continue
        if ch == '"':
            start_line, start_column = line, column
            i += 1
            column += 1
            parts: list[str] = []
            closed = False
            while i < n:
                ch = text[i]
                if ch == '"':
                    closed = True
                    i += 1
                    column += 1
                    break
                if ch == "\n":
                    break
                if ch == "\\":
                    if i + 1 >= n:
                        break
                    escape = text[i + 1]
                    mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(escape)
                    if mapped is None:
                        errors.append(ParseError(
                            SourceSpan(filename, line, column),
                            f"unknown escape sequence \\{escape}", ErrorKind.LEXICAL))
                        mapped = escape
                    parts.append(mapped)
                    i += 2
                    column += 2
                    continue
                parts.append(ch)
                i += 1
                column += 1
            if not closed:
                errors.append(ParseError(
                    SourceSpan(filename, start_line, start_column),
                    "unterminated string literal", ErrorKind.LEXICAL))
            tokens.append(_Token("string", "".join(parts), start_line, start_column))
            continue
        match = IDENT_PATTERN.match(text, i)
        if match:
            word = match.group(0)
            tokens.append(_Token("ident", word, line, column))
            i = match.end()
            column += len(word)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("number", text[i:j], line, column))
            column += j - i
            i = j
            continue
        errors.append(ParseError(span(), f"unexpected character {ch!r}", ErrorKind.LEXICAL))
        i += 1
        column += 1

    tokens.append(_Token("eof", "", line, column))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], filename: str, errors: list[ParseError]):
        self.tokens = tokens
        self.filename = filename
        self.errors = errors
        self.pos = 0
        self.nodes: dict[str, Node] = {}
        self.guards: dict[tuple[str, str], tuple[InhibitAnnotation, ...]] = {}
        self.decl_spans: dict[str, SourceSpan] = {}
        self.counter = 0
        self.depth = 0

    # token plumbing

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def at(self, kind: str, text: str | None = None) -> bool:
        token = self.peek()
        return token.kind == kind and (text is None or token.text == text)

    def at_keyword(self, *words: str) -> bool:
        token = self.peek()
        return token.kind == "ident" and token.text in words

    def span_of(self, token: _Token) -> SourceSpan:
        return SourceSpan(self.filename, token.line, token.column)

    def error(self, token: _Token, message: str,
              kind: ErrorKind = ErrorKind.SYNTACTIC) -> None:
        self.errors.append(ParseError(self.span_of(token), message, kind))

    def expect(self, kind: str, what: str) -> _Token | None:
        if self.at(kind):
            return self.advance()
        self.error(self.peek(), f"expected {what}")
        return None

    def skip_statement(self) -> None:
        """Recover by skipping to the next ';' or a brace boundary."""
        depth = 0
        while not self.at("eof"):
            token = self.peek()
            if depth == 0 and token.kind in (";", "}"):
                if token.kind == ";":
                    self.advance()
                return
            if token.kind == "{":
                depth += 1
            elif token.kind == "}":
                depth -= 1
            self.advance()

    # grammar

    def gate_id_for(self, owner_event: str | None) -> str:
        # Gates are anonymous in the text, so their ids are derived from the
        # owning event. The "::" makes collisions with written ids impossible
        # and keeps re-parsed trees structurally identical to their source.
        if owner_event is not None:
            return f"{owner_event}::gate"
        self.counter += 1
        return f"::gate{self.counter}"

    def declare(self, node: Node, token: _Token) -> bool:
        if node.id in self.nodes:
            self.error(token, f"duplicate identifier {node.id!r}", ErrorKind.SEMANTIC)
            return False
        self.nodes[node.id] = node
        self.decl_spans[node.id] = self.span_of(token)
        return True

    def parse_document(self) -> FaultTree | None:
        if not self.at_keyword("case"):
            self.error(self.peek(), "missing case header")
            return None
        self.advance()
        if self.at("ident") or self.at("string"):
            id_token = self.advance()
        else:
            id_token = None
            self.error(self.peek(), "expected case identifier")
        self.expect("{", "'{'")
        case_id = id_token.text if id_token else "<missing>"

        category: Category | None = None
        variant: str | None = None
        impacts: tuple[str, ...] = ()
        top: str | None = None
        phase_order: tuple[str, ...] | None = None
        seen: set[str] = set()

        while not self.at("}") and not self.at("eof"):
            token = self.peek()
            if self.at_keyword("category"):
                seen.add("category")
                category = self.parse_category()
            elif self.at_keyword("variant"):
                variant = self.parse_variant()
            elif self.at_keyword("impacts"):
                impacts = self.parse_impacts()
            elif self.at_keyword("tree"):
                seen.add("tree")
                top = self.parse_tree_block()
            elif self.at_keyword("phases"):
                seen.add("phases")
                phase_order = self.parse_phases()
            else:
                self.error(token, f"unexpected token {token.text!r} in case body")
                self.skip_statement()

        self.expect("}", "'}' closing the case")
        if not self.at("eof"):
            self.error(self.peek(), "unexpected trailing content after case")

        if "category" not in seen:
            self.error(self.peek(), "case is missing a category declaration")
        if "tree" not in seen:
            self.error(self.peek(), "case is missing a tree block")
        if "phases" not in seen:
            self.error(self.peek(), "case is missing a phases declaration")
        if self.errors or category is None or top is None or phase_order is None:
            return None

        metadata = CaseMetadata(case_id=case_id, category=category,
                                variant=variant, impacts=impacts)
        return FaultTree(top=top, nodes=self.nodes, guards=self.guards,
                         phase_order=phase_order, metadata=metadata)

    def parse_category(self) -> Category | None:
        self.advance()
        self.expect(":", "':' after 'category'")
        token = self.expect("ident", "category name")
        self.expect(";", "';'")
        if token is None:
            return None
        try:
            return Category(token.text)
        except ValueError:
            self.error(token, f"unknown category {token.text!r}", ErrorKind.SEMANTIC)
            return None

    def parse_variant(self) -> str | None:
        self.advance()
        self.expect(":", "':' after 'variant'")
        token = self.expect("string", "variant string")
        self.expect(";", "';'")
        return token.text if token else None

    def parse_impacts(self) -> tuple[str, ...]:
        self.advance()
        self.expect(":", "':' after 'impacts'")
        self.expect("[", "'['")
        items: list[str] = []
        while not self.at("]") and not self.at("eof"):
            token = self.expect("string", "impact string")
            if token is None:
                self.skip_statement()
                return tuple(items)
            items.append(token.text)
            if self.at(","):
                self.advance()
            else:
                break
        self.expect("]", "']'")
        self.expect(";", "';'")
        return tuple(items)

    def parse_phases(self) -> tuple[str, ...]:
        self.advance()
        self.expect(":", "':' after 'phases'")
        self.expect("[", "'['")
        items: list[str] = []
        while not self.at("]") and not self.at("eof"):
            token = self.expect("ident", "phase event identifier")
            if token is None:
                self.skip_statement()
                return tuple(items)
            items.append(token.text)
            if self.at(","):
                self.advance()
            else:
                break
        self.expect("]", "']'")
        self.expect(";", "';'")
        return tuple(items)

    def parse_tree_block(self) -> str | None:
        self.advance()
        self.expect("{", "'{' after 'tree'")
        top = self.parse_event()
        self.expect("}", "'}' closing the tree block")
        return top

    def parse_event(self) -> str | None:
        token = self.peek()
        if not self.at_keyword(*EVENT_KEYWORDS):
            self.error(token, "expected an event declaration "
                              "(intermediate, basic or undeveloped)")
            self.skip_statement()
            return None
        if self.depth > MAX_NESTING:
            self.error(token, f"gate nesting exceeds {MAX_NESTING} levels")
            self.skip_statement()
            return None
        kind = EVENT_KEYWORDS[self.advance().text]
        id_token = self.expect("ident", "event identifier")
        label_token = self.expect("string", "event label")
        techniques = self.parse_tags()

        # Reserve the slot before descending into the gate so that node
        # storage follows the order declarations appear in the text.
        event_id: str | None = None
        if id_token is not None:
            node = EventNode(id=id_token.text,
                             label=label_token.text if label_token else "",
                             kind=kind, techniques=techniques)
            if self.declare(node, id_token):
                event_id = node.id

        if self.at_keyword(*GATE_KEYWORDS):
            if kind is EventKind.INTERMEDIATE:
                gate_id = self.parse_gate(event_id)
                if event_id is not None and gate_id is not None:
                    self.nodes[event_id] = replace(self.nodes[event_id], gate=gate_id)
            else:
                self.error(self.peek(),
                           f"{kind.value} events are leaves and cannot have a gate",
                           ErrorKind.SEMANTIC)
                self.parse_gate(None)

        return event_id

    def parse_tags(self) -> tuple[str, ...]:
        if not self.at_keyword("tags"):
            return ()
        self.advance()
        self.expect(":", "':' after 'tags'")
        tags: list[str] = []
        while True:
            token = self.expect("ident", "technique tag")
            if token is None:
                break
            tag = token.text
            if self.at("."):
                self.advance()
                sub = self.expect("number", "sub-technique number")
                if sub is not None:
                    tag = f"{tag}.{sub.text}"
            if not re.match(r"^T\d{4}(\.\d{3})?$", tag):
                self.error(token, f"malformed technique tag {tag!r}", ErrorKind.SEMANTIC)
            else:
                tags.append(tag)
            if self.at(","):
                self.advance()
            else:
                break
        return tuple(tags)

    def parse_gate(self, owner_event: str | None) -> str | None:
        kind_token = self.advance()
        kind = GATE_KEYWORDS[kind_token.text]
        self.expect("{", "'{' after the gate keyword")
        children: list[str] = []
        self.depth += 1
        while not self.at("}") and not self.at("eof"):
            child = self.parse_event()
            if child is not None:
                children.append(child)
            if self.at(","):  # optional separator between sibling events
                self.advance()
        self.depth -= 1
        self.expect("}", "'}' closing the gate")

        gate_id = self.gate_id_for(owner_event)
        self.nodes[gate_id] = GateNode(id=gate_id, kind=kind, children=tuple(children))
        self.decl_spans[gate_id] = self.span_of(kind_token)

        annotations: list[InhibitAnnotation] = []
        while self.at_keyword("inhibit"):
            annotation = self.parse_inhibit()
            if annotation is not None:
                annotations.append(annotation)
        if annotations and owner_event is not None:
            self.guards[(gate_id, owner_event)] = tuple(annotations)
        return gate_id

    def parse_inhibit(self) -> InhibitAnnotation | None:
        keyword = self.advance()
        composition = Composition.PARALLEL
        composition_token = keyword
        if self.at_keyword("parallel", "sequential"):
            composition_token = self.advance()
            composition = Composition(composition_token.text)
        self.expect("[", "'[' opening the control list")
        controls: list[Control] = []
        broken = False
        attempted = 0
        while not self.at("]") and not self.at("eof"):
            token = self.expect("ident", "control family")
            if token is None:
                broken = True
                break
            attempted += 1
            dotted = token.text
            if self.expect(".", "'.' in FAMILY.Name") is not None:
                name = self.expect("ident", "control name")
                if name is not None:
                    dotted = f"{token.text}.{name.text}"
            try:
                controls.append(Control.parse(dotted))
            except ValueError as exc:
                self.error(token, str(exc), ErrorKind.SEMANTIC)
            if self.at(","):
                self.advance()
            else:
                break
        self.expect("]", "']' closing the control list")

        condition: str | None = None
        if self.at_keyword("if"):
            self.advance()
            cond_id = self.expect("ident", "conditioning event identifier")
            cond_label = self.expect("string", "conditioning event label")
            if cond_id is not None:
                node = EventNode(id=cond_id.text,
                                 label=cond_label.text if cond_label else "",
                                 kind=EventKind.CONDITIONING)
                if self.declare(node, cond_id):
                    condition = cond_id.text

        if broken or not controls:
            if not broken and attempted == 0:
                self.error(keyword, "inhibit clause requires at least one control",
                           ErrorKind.SEMANTIC)
            return None
        try:
            return InhibitAnnotation(controls=tuple(controls),
                                     composition=composition, condition=condition)
        except ValueError as exc:
            self.error(composition_token, str(exc), ErrorKind.SEMANTIC)
            return None


def parse_document(text: str, filename: str = "<input>") -> ParseOutcome:
    """Parse a document, collecting every error instead of stopping early."""
    errors: list[ParseError] = []
    tokens = _lex(text, filename, errors)
    parser = _Parser(tokens, filename, errors)
    tree = parser.parse_document()
    if tree is not None:
        report = validate_tree(tree)
        for violation in report.violations:
            span = parser.decl_spans.get(violation.subject or "",
                                         SourceSpan(filename, 1, 1))
            errors.append(ParseError(span, violation.message, ErrorKind.SEMANTIC))
        if not report.ok:
            tree = None
    if errors:
        tree = None
    return ParseOutcome(tree=tree, errors=errors)


def parse_bytes(data: bytes, filename: str = "<input>") -> ParseOutcome:
    """Decode UTF-8 and parse; undecodable input becomes a lexical error."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        prefix = data[:exc.start].decode("utf-8", errors="ignore")
        line = prefix.count("\n") + 1
        column = len(prefix) - (prefix.rfind("\n") + 1) + 1
        return ParseOutcome(tree=None, errors=[ParseError(
            SourceSpan(filename, line, column),
            "input is not valid UTF-8", ErrorKind.LEXICAL)])
    return parse_document(text, filename)


def parse(text: str, filename: str = "<input>") -> FaultTree:
    """Parse a document or raise :class:`ParseFailure` with all diagnostics."""
    outcome = parse_document(text, filename)
    if outcome.tree is None:
        raise ParseFailure(outcome.errors)
    return outcome.tree


# --- serializer ------------------------------------------------------------


def _quote(text: str) -> str:
    escaped = (text.replace("\\", "\\\\").replace('"', '\\"')
                   .replace("\n", "\\n").replace("\t", "\\t"))
    return f'"{escaped}"'


def serialize(tree: FaultTree) -> str:
    """Render a valid tree in canonical form.

    Canonical means: events in tree order, two-space indentation, explicit
    composition keywords. ``parse(serialize(t))`` is structurally identical
    to ``t`` and serialization is idempotent.
    """
    require_valid(tree)
    meta = tree.metadata
    case_id = meta.case_id
    if not IDENT_PATTERN.fullmatch(case_id):
        case_id = _quote(case_id)
    out: list[str] = [f"case {case_id} {{"]
    out.append(f"  category: {meta.category.value};")
    if meta.variant is not None:
        out.append(f"  variant: {_quote(meta.variant)};")
    impacts = ", ".join(_quote(impact) for impact in meta.impacts)
    out.append(f"  impacts: [{impacts}];")
    out.append("  tree {")
    _write_event(tree, tree.top, 2, out)
    out.append("  }")
    phases = ", ".join(tree.phase_order)
    out.append(f"  phases: [{phases}];")
    out.append("}")
    return "\n".join(out) + "\n"


def _write_event(tree: FaultTree, event_id: str, depth: int, out: list[str]) -> None:
    event = tree.event(event_id)
    pad = "  " * depth
    line = f"{pad}{event.kind.value} {event.id} {_quote(event.label)}"
    if event.techniques:
        line += " tags: " + ", ".join(event.techniques)
    out.append(line)
    if event.gate is None:
        return
    gate = tree.gate(event.gate)
    out.append(f"{pad}{gate.kind.value} {{")
    for child_id in gate.children:
        _write_event(tree, child_id, depth + 1, out)
    suffix = ""
    for annotation in tree.guards.get((gate.id, event.id), ()):
        controls = ", ".join(str(c) for c in annotation.controls)
        suffix += f" inhibit {annotation.composition.value} [{controls}]"
        if annotation.condition is not None:
            condition = tree.event(annotation.condition)
            suffix += f" if {condition.id} {_quote(condition.label)}"
    out.append(f"{pad}}}{suffix}")
