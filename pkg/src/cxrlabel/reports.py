"""Report corpus: domain types and ingestion.

Radiology reports are sectioned free text. This module parses raw report
text into sections, splits sections into tokenized sentences with a
deterministic rule-based splitter, and loads/serializes the corpus and
dependency-graph file formats used by the rest of the pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from cxrlabel.errors import (
    BadHeadIndex,
    DuplicateReportId,
    EmptyReport,
    MalformedRecord,
    TokenCountMismatch,
)

SECTION_TAGS = ("comparison", "indication", "findings", "impression", "other")

# Longest synonym first so "findings include:" is not eaten by "findings:".
_HEADER_SYNONYMS = (
    ("findings include", "findings"),
    ("comparison", "comparison"),
    ("indication", "indication"),
    ("impression", "impression"),
    ("findings", "findings"),
    ("other", "other"),
)

# A token is a decimal number, a run of non-separator characters, or a
# single punctuation mark emitted standalone.
_TOKEN_RE = re.compile(r"\d+\.\d+|[^\s/,():;.!?]+|[/,():;.!?]")


class SentenceRef(NamedTuple):
    report_id: str
    section: str
    index: int

    def __str__(self) -> str:
        return f"{self.report_id}/{self.section}/{self.index}"


class Token(NamedTuple):
    position: int  # 1-based
    surface: str
    lowered: str


class Edge(NamedTuple):
    head: int  # 0 = virtual root
    dependent: int
    label: str


@dataclass(frozen=True)
class RadiologyReport:
    report_id: str
    patient_id: str
    sections: dict[str, str]

    def __post_init__(self):
        if not self.report_id:
            raise MalformedRecord("empty report_id")
        if not self.sections:
            raise MalformedRecord(f"report {self.report_id!r} has no sections")
        for tag in self.sections:
            if tag not in SECTION_TAGS:
                raise MalformedRecord(f"unknown section tag {tag!r}")


@dataclass(frozen=True)
class Sentence:
    report_id: str
    section: str
    index: int
    tokens: tuple[Token, ...]

    @property
    def ref(self) -> SentenceRef:
        return SentenceRef(self.report_id, self.section, self.index)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DependencyGraph:
    sentence_ref: SentenceRef
    n_tokens: int
    surfaces: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.n_tokens < 1:
            raise TokenCountMismatch("graph declares no tokens", self.sentence_ref)
        if len(self.surfaces) != self.n_tokens:
            raise TokenCountMismatch(
                f"{len(self.surfaces)} surfaces for {self.n_tokens} tokens",
                self.sentence_ref,
            )
        for edge in self.edges:
            if not (0 <= edge.head <= self.n_tokens):
                raise BadHeadIndex(f"head {edge.head} outside 0..{self.n_tokens}")
            if not (1 <= edge.dependent <= self.n_tokens):
                raise BadHeadIndex(
                    f"dependent {edge.dependent} outside 1..{self.n_tokens}"
                )
            if edge.head == edge.dependent:
                raise BadHeadIndex(f"self-loop at token {edge.head}")

    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    def out_edges(self, position: int) -> list[Edge]:
        return [e for e in self.edges if e.head == position]

    def in_edges(self, position: int) -> list[Edge]:
        return [e for e in self.edges if e.dependent == position]

    def descendants(self, position: int) -> set[int]:
        """Token positions reachable from `position` via head->dependent edges."""
        seen: set[int] = set()
        frontier = [position]
        while frontier:
            here = frontier.pop()
            for edge in self.out_edges(here):
                if edge.dependent not in seen:
                    seen.add(edge.dependent)
                    frontier.append(edge.dependent)
        return seen

    def with_edges(self, edges: Iterable[Edge]) -> "DependencyGraph":
        return DependencyGraph(
            sentence_ref=self.sentence_ref,
            n_tokens=self.n_tokens,
            surfaces=self.surfaces,
            edges=_canonical_edges(edges),
        )


def _canonical_edges(edges: Iterable[Edge]) -> tuple[Edge, ...]:
    return tuple(sorted(set(edges)))


@dataclass(frozen=True)
class Corpus:
    reports: tuple[RadiologyReport, ...]
    graphs: dict[SentenceRef, DependencyGraph] = field(default_factory=dict)

    def __post_init__(self):
        seen: set[str] = set()
        for report in self.reports:
            if report.report_id in seen:
                raise DuplicateReportId(report.report_id)
            seen.add(report.report_id)
        sentences = {s.ref: s for r in self.reports for s in split_sentences(r)}
        for ref, graph in self.graphs.items():
            if ref not in sentences:
                raise TokenCountMismatch("graph for unknown sentence", ref)
            n = len(sentences[ref])
            if graph.n_tokens != n:
                raise TokenCountMismatch(
                    f"graph has {graph.n_tokens} tokens, sentence has {n}", ref
                )

    def report_by_id(self, report_id: str) -> RadiologyReport:
        for report in self.reports:
            if report.report_id == report_id:
                return report
        raise KeyError(report_id)

    def sentences(self) -> list[Sentence]:
        return [s for r in self.reports for s in split_sentences(r)]

    def with_graphs(self, graphs: dict[SentenceRef, DependencyGraph]) -> "Corpus":
        merged = dict(self.graphs)
        merged.update(graphs)
        return Corpus(self.reports, merged)


def _match_header(line: str) -> Optional[tuple[str, str]]:
    """Return (section tag, text after the colon) when the line opens a section."""
    stripped = line.lstrip()
    lowered = stripped.lower()
    for synonym, tag in _HEADER_SYNONYMS:
        if lowered.startswith(synonym):
            rest = stripped[len(synonym):].lstrip()
            if rest.startswith(":"):
                return tag, rest[1:].strip()
    return None


def parse_report_text(
    raw: str, report_id: str = "adhoc", patient_id: str = "adhoc"
) -> RadiologyReport:
    """Split raw report text into sections on header lines.

    A line whose first word(s) case-insensitively name a section followed
    by ":" opens that section. Text before any header, or a report with no
    headers at all, lands in section "other".
    """
    if not raw or not raw.strip():
        raise EmptyReport("blank report text")
    chunks: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in raw.splitlines():
        header = _match_header(line)
        if header is not None:
            current, rest = header
            chunks.setdefault(current, [])
            if rest:
                chunks[current].append(rest)
            continue
        if line.strip():
            chunks.setdefault(current or "other", []).append(line.strip())
    sections = {tag: " ".join(parts) for tag, parts in chunks.items()}
    return RadiologyReport(report_id, patient_id, sections)


def serialize_report(report: RadiologyReport) -> str:
    return "\n".join(f"{tag}: {text}" for tag, text in report.sections.items())


def _sentence_chunks(text: str) -> list[str]:
    # A terminator ends a sentence only before whitespace or end of text,
    # so the period inside a decimal like "2.2" never splits.
    chunks: list[str] = []
    buf: list[str] = []
    for i, ch in enumerate(text):
        buf.append(ch)
        if ch in ".!?":
            nxt = text[i + 1] if i + 1 < len(text) else ""
            if nxt == "" or nxt.isspace():
                chunks.append("".join(buf))
                buf = []
    if buf:
        chunks.append("".join(buf))
    return [c.strip() for c in chunks if c.strip()]


def tokenize(chunk: str) -> tuple[Token, ...]:
    surfaces = _TOKEN_RE.findall(chunk)
    return tuple(
        Token(i + 1, surface, surface.lower()) for i, surface in enumerate(surfaces)
    )


def split_sentences(report: RadiologyReport) -> list[Sentence]:
    sentences: list[Sentence] = []
    for tag, text in report.sections.items():
        index = 0
        for chunk in _sentence_chunks(text):
            tokens = tokenize(chunk)
            if tokens:
                sentences.append(Sentence(report.report_id, tag, index, tokens))
                index += 1
    return sentences


def load_corpus(path) -> Corpus:
    """Load the one-record-per-line corpus format.

    Fields are tab-separated: report_id, patient_id, then one "tag=text"
    pair per populated section.
    """
    reports: list[RadiologyReport] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise MalformedRecord(
                    "record needs report_id, patient_id and one section", line_no
                )
            report_id, patient_id = fields[0].strip(), fields[1].strip()
            if not report_id:
                raise MalformedRecord("missing report_id", line_no)
            if not patient_id:
                raise MalformedRecord("missing patient_id", line_no)
            if report_id in seen:
                raise DuplicateReportId(report_id)
            seen.add(report_id)
            sections: dict[str, str] = {}
            for pair in fields[2:]:
                tag, sep, text = pair.partition("=")
                if not sep:
                    raise MalformedRecord(f"section field {pair!r} lacks '='", line_no)
                if tag not in SECTION_TAGS:
                    raise MalformedRecord(f"unknown section tag {tag!r}", line_no)
                if tag in sections:
                    raise MalformedRecord(f"duplicate section tag {tag!r}", line_no)
                sections[tag] = text
            reports.append(RadiologyReport(report_id, patient_id, sections))
    return Corpus(tuple(reports))


def load_dependency_file(path) -> dict[SentenceRef, DependencyGraph]:
    """Load blank-line-separated dependency graphs.

    Each sentence starts with "#sent<TAB>report_id<TAB>section<TAB>index
    <TAB>n_tokens" followed by rows "position<TAB>surface<TAB>head<TAB>
    deprel". A position may repeat to give a token several heads; head 0
    with deprel "-" declares a token that hangs off no edge, while head 0
    with a real label is a virtual-root edge.
    """
    graphs: dict[SentenceRef, DependencyGraph] = {}
    header: Optional[tuple[SentenceRef, int]] = None
    rows: list[tuple[int, list[str]]] = []

    def flush():
        nonlocal header, rows
        if header is None:
            return
        ref, n_tokens = header
        if ref in graphs:
            raise MalformedRecord(f"duplicate sentence {ref}")
        surfaces: dict[int, str] = {}
        edges: set[Edge] = set()
        for row_no, fields in rows:
            position, surface, head, deprel = fields
            try:
                pos = int(position)
                head_pos = int(head)
            except ValueError:
                raise BadHeadIndex(
                    f"non-integer position/head {position!r}/{head!r}", row_no
                ) from None
            if not (1 <= pos <= n_tokens):
                raise BadHeadIndex(f"position {pos} outside 1..{n_tokens}", row_no)
            if not (0 <= head_pos <= n_tokens):
                raise BadHeadIndex(f"head {head_pos} outside 0..{n_tokens}", row_no)
            if head_pos == pos:
                raise BadHeadIndex(f"self-loop at token {pos}", row_no)
            if pos in surfaces and surfaces[pos] != surface:
                raise TokenCountMismatch(
                    f"conflicting surfaces for position {pos}", ref
                )
            surfaces[pos] = surface
            if deprel == "-":
                if head_pos != 0:
                    raise MalformedRecord("deprel '-' requires head 0", row_no)
            else:
                edges.add(Edge(head_pos, pos, deprel))
        if set(surfaces) != set(range(1, n_tokens + 1)):
            raise TokenCountMismatch(
                f"rows cover positions {sorted(surfaces)}, expected 1..{n_tokens}",
                ref,
            )
        graphs[ref] = DependencyGraph(
            ref,
            n_tokens,
            tuple(surfaces[i] for i in range(1, n_tokens + 1)),
            _canonical_edges(edges),
        )
        header = None
        rows = []

    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            fields = line.split("\t")
            if fields[0] == "#sent":
                flush()
                if len(fields) != 5:
                    raise MalformedRecord("sentence header needs 5 fields", line_no)
                try:
                    index = int(fields[3])
                    n_tokens = int(fields[4])
                except ValueError:
                    raise MalformedRecord("non-integer index/count", line_no) from None
                header = (SentenceRef(fields[1], fields[2], index), n_tokens)
                continue
            if header is None:
                raise MalformedRecord("token row before any #sent header", line_no)
            if len(fields) != 4:
                raise MalformedRecord("token row needs 4 fields", line_no)
            rows.append((line_no, fields))
    flush()
    return graphs


def serialize_dependency_graphs(graphs: dict[SentenceRef, DependencyGraph]) -> str:
    """Inverse of load_dependency_file; reload yields identical edge sets."""
    blocks: list[str] = []
    for ref in sorted(graphs):
        graph = graphs[ref]
        lines = [
            "\t".join(
                ["#sent", ref.report_id, ref.section, str(ref.index),
                 str(graph.n_tokens)]
            )
        ]
        by_dependent: dict[int, list[Edge]] = {}
        for edge in graph.edges:
            by_dependent.setdefault(edge.dependent, []).append(edge)
        for pos in range(1, graph.n_tokens + 1):
            surface = graph.surfaces[pos - 1]
            edges = sorted(by_dependent.get(pos, []))
            if not edges:
                lines.append(f"{pos}\t{surface}\t0\t-")
            for edge in edges:
                lines.append(f"{pos}\t{surface}\t{edge.head}\t{edge.label}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
