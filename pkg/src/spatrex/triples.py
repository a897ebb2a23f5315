"""Parsing, validation and normalization of extracted semantic triples.

Model responses arrive as loosely structured text built around
``(n) <subject, relation, object>`` entries.  ``parse_triples`` is a
never-raising scanner: every ``<...>`` group in the input ends up either as a
parsed triple or as a skipped fragment with a reason, and literal "not found"
lines are tallied separately.  Validation then grades each triple against the
target relation and entity; invalid triples are kept with a diagnosis rather
than dropped, so precision can be computed over all produced triples or over
valid ones only.

Place labels are normalized very lightly (whitespace and trailing punctuation
only).  Distinct surface forms of the same place deliberately stay distinct:
no alias merging, no gazetteer canonicalization.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

VALID = "valid"
WRONG_RELATION = "wrong_relation"
ENTITY_MISSING = "entity_missing"
MALFORMED = "malformed"

VALIDITIES = (VALID, WRONG_RELATION, ENTITY_MISSING, MALFORMED)

_ENTRY_RE = re.compile(r"(?:\((\d+)\)\s*)?<([^<>]*)>")
_BRACKET_RE = re.compile(r"<[^<>]*>")
_NOT_FOUND_LINE_RE = re.compile(
    r"^\s*(?:\(\d+\)\s*)?[\"']?not found[\"']?\.?\s*$", re.IGNORECASE
)
_TRAILING_PUNCT_RE = re.compile(r"[\s.,;:!?'\"’]+$")
_WS_RE = re.compile(r"\s+")


class TripleFormatError(Exception):
    """Raised only by file readers; the response parser itself never raises."""


@dataclass(frozen=True)
class SemanticTriple:
    """A ``<subject, relation, object>`` assertion with provenance."""

    subject: str
    relation: str
    object: str
    passage_number: int | None = None
    batch_index: int | None = None
    validity: str | None = None


@dataclass(frozen=True)
class ParseReport:
    """Everything found in one model response."""

    triples: tuple[SemanticTriple, ...]
    skipped_fragments: tuple[tuple[str, str], ...]
    not_found_count: int


def normalize_place(label: str) -> str:
    """Trim, collapse internal whitespace, strip trailing punctuation.

    Casing is preserved; "greta hall" and "Greta Hall" stay distinct labels.
    """
    collapsed = _WS_RE.sub(" ", label).strip()
    return _TRAILING_PUNCT_RE.sub("", collapsed)


def parse_triples(content: str) -> ParseReport:
    """Scan a response for ``(n) <s, r, o>`` entries; never raises.

    Fields are split on the first two commas and trimmed, so commas inside a
    subject are not supported and extra commas bind to the object.  Bracket
    groups with fewer than three fields become skipped fragments.
    """
    triples: list[SemanticTriple] = []
    skipped: list[tuple[str, str]] = []

    for match in _ENTRY_RE.finditer(content):
        label, inner = match.group(1), match.group(2)
        parts = inner.split(",", 2)
        if len(parts) != 3:
            skipped.append((match.group(0), f"expected 3 comma-separated fields, got {len(parts)}"))
            continue
        subject, relation, obj = (part.strip() for part in parts)
        triples.append(
            SemanticTriple(
                subject=subject,
                relation=relation,
                object=obj,
                passage_number=int(label) if label is not None else None,
            )
        )

    not_found = sum(
        1 for line in content.splitlines() if _NOT_FOUND_LINE_RE.match(line)
    )
    return ParseReport(
        triples=tuple(triples),
        skipped_fragments=tuple(skipped),
        not_found_count=not_found,
    )


def validate_triple(triple: SemanticTriple, relation: str, entity: str) -> SemanticTriple:
    """Return a copy with ``validity`` graded against the target relation/entity.

    All checks are case-insensitive on normalized labels.  Exactly one of
    subject/object must be the target entity; self-loops on the entity and
    triples naming it on neither side are both ``entity_missing``.
    """
    subject = normalize_place(triple.subject)
    obj = normalize_place(triple.object)
    if not subject or not obj or not triple.relation.strip():
        return replace(triple, validity=MALFORMED)
    if triple.relation.strip().casefold() != relation.strip().casefold():
        return replace(triple, validity=WRONG_RELATION)
    target = normalize_place(entity).casefold()
    subject_hits = subject.casefold() == target
    object_hits = obj.casefold() == target
    if subject_hits == object_hits:
        return replace(triple, validity=ENTITY_MISSING)
    return replace(triple, validity=VALID)


def render_triples(triples: Sequence[SemanticTriple]) -> str:
    """Render triples back to the ``(n) <s, r, o>`` response format."""
    pieces = []
    for triple in triples:
        label = f"({triple.passage_number}) " if triple.passage_number is not None else ""
        pieces.append(f"{label}<{triple.subject}, {triple.relation}, {triple.object}>")
    return "".join(pieces)


CSV_HEADER = ("subject", "relation", "object", "passage_number", "batch_index", "validity")


def triples_to_csv(triples: Iterable[SemanticTriple]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t in triples:
        writer.writerow(
            (
                t.subject,
                t.relation,
                t.object,
                "" if t.passage_number is None else t.passage_number,
                "" if t.batch_index is None else t.batch_index,
                "" if t.validity is None else t.validity,
            )
        )
    return buffer.getvalue()


def triples_from_csv(text: str, source: str = "<string>") -> list[SemanticTriple]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise TripleFormatError(f"{source}: expected header {','.join(CSV_HEADER)}")
    triples: list[SemanticTriple] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise TripleFormatError(f"{source}:{lineno}: expected {len(CSV_HEADER)} columns")
        subject, relation, obj, passage, batch, validity = row
        if validity and validity not in VALIDITIES:
            raise TripleFormatError(f"{source}:{lineno}: unknown validity {validity!r}")
        triples.append(
            SemanticTriple(
                subject=subject,
                relation=relation,
                object=obj,
                passage_number=int(passage) if passage else None,
                batch_index=int(batch) if batch else None,
                validity=validity or None,
            )
        )
    return triples


def read_triples_csv(path: str | Path) -> list[SemanticTriple]:
    return triples_from_csv(Path(path).read_text(encoding="utf-8"), source=str(path))


def triples_to_jsonl(triples: Iterable[SemanticTriple]) -> str:
    lines = []
    for t in triples:
        lines.append(
            json.dumps(
                {
                    "subject": t.subject,
                    "relation": t.relation,
                    "object": t.object,
                    "passage_number": t.passage_number,
                    "batch_index": t.batch_index,
                    "validity": t.validity,
                },
                ensure_ascii=False,
            )
        )
    return "".join(line + "\n" for line in lines)
