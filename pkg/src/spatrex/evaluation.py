"""Gold-standard loading and precision scoring over repeated iterations.

The gold standard is a CSV (``context_id,relation_holds,subject,object``) with
one row per expected pair; contexts where the relation does not hold carry
``false`` and empty pair fields.  A produced triple is correct when its
(subject, object) pair, case-insensitively after place normalization, appears
among the expected pairs of its source context.

Precision is the fraction of correct triples out of the triples produced,
computed in exact rational arithmetic and only rounded for display (half-up,
three decimals).  The denominator can be all parsed triples (default) or the
valid-only subset.  Repeated prompt iterations are averaged arithmetically.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .triples import VALID, SemanticTriple, normalize_place

ALL_PARSED = "all_parsed"
VALID_ONLY = "valid_only"
POLICIES = (ALL_PARSED, VALID_ONLY)


class GoldFormatError(Exception):
    """Raised for malformed or inconsistent gold-standard files."""


class EvaluationError(Exception):
    """Raised when produced triples cannot be scored against the gold."""


@dataclass(frozen=True)
class GoldContext:
    context_id: str
    relation_holds: bool
    expected_pairs: frozenset[tuple[str, str]]


@dataclass(frozen=True)
class GoldStandard:
    entries: tuple[GoldContext, ...]

    def by_id(self) -> Mapping[str, GoldContext]:
        return {entry.context_id: entry for entry in self.entries}


@dataclass(frozen=True)
class EvaluationReport:
    """Per-iteration precision plus the averaged headline number."""

    iteration_precisions: tuple[Fraction | None, ...]
    average_precision: Fraction | None
    produced_counts: tuple[int, ...]
    correct_counts: tuple[int, ...]
    denominator_policy: str


def _parse_bool(raw: str, where: str) -> bool:
    value = raw.strip().casefold()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise GoldFormatError(f"{where}: relation_holds must be true/false, got {raw!r}")


def load_gold(path: str | Path) -> GoldStandard:
    """Parse a gold CSV; rows sharing a context_id merge their expected pairs.

    Errors: malformed rows (with line number), conflicting relation_holds for
    one context, duplicate identical pair rows, and pair fields inconsistent
    with relation_holds.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise GoldFormatError(f"{path}: empty gold file")
    start = 1 if [cell.strip() for cell in rows[0]] == ["context_id", "relation_holds", "subject", "object"] else 0

    holds: dict[str, bool] = {}
    pairs: dict[str, set[tuple[str, str]]] = {}
    order: list[str] = []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise GoldFormatError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
        context_id = row[0].strip()
        if not context_id:
            raise GoldFormatError(f"{path}:{lineno}: empty context_id")
        relation_holds = _parse_bool(row[1], f"{path}:{lineno}")
        subject, obj = row[2].strip(), row[3].strip()

        if context_id not in holds:
            holds[context_id] = relation_holds
            pairs[context_id] = set()
            order.append(context_id)
        elif holds[context_id] != relation_holds:
            raise GoldFormatError(
                f"{path}:{lineno}: context {context_id!r} has conflicting relation_holds"
            )
        elif not relation_holds:
            raise GoldFormatError(f"{path}:{lineno}: duplicate context_id {context_id!r}")

        if relation_holds:
            if not subject or not obj:
                raise GoldFormatError(
                    f"{path}:{lineno}: relation_holds context {context_id!r} needs a subject/object pair"
                )
            pair = (normalize_place(subject).casefold(), normalize_place(obj).casefold())
            if pair in pairs[context_id]:
                raise GoldFormatError(
                    f"{path}:{lineno}: duplicate pair for context {context_id!r}"
                )
            pairs[context_id].add(pair)
        elif subject or obj:
            raise GoldFormatError(
                f"{path}:{lineno}: context {context_id!r} holds no relation but lists a pair"
            )

    entries = tuple(
        GoldContext(
            context_id=context_id,
            relation_holds=holds[context_id],
            expected_pairs=frozenset(pairs[context_id]),
        )
        for context_id in order
    )
    return GoldStandard(entries=entries)


def _is_correct(triple: SemanticTriple, by_id: Mapping[str, GoldContext]) -> bool:
    if triple.passage_number is None:
        raise EvaluationError(
            f"triple <{triple.subject}, {triple.relation}, {triple.object}> has no context reference"
        )
    context = by_id.get(str(triple.passage_number))
    if context is None:
        raise EvaluationError(f"triple references unknown context_id {triple.passage_number!r}")
    pair = (
        normalize_place(triple.subject).casefold(),
        normalize_place(triple.object).casefold(),
    )
    return pair in context.expected_pairs


def precision(
    triples: Sequence[SemanticTriple],
    gold: GoldStandard,
    policy: str = ALL_PARSED,
) -> Fraction | None:
    """Exact precision of one iteration's triples, or None for no predictions.

    A triple's source context is its (global) passage number, matched against
    the gold context_id.  ``all_parsed`` divides by every produced triple;
    ``valid_only`` restricts numerator and denominator to validity=valid.
    """
    if policy not in POLICIES:
        raise EvaluationError(f"unknown denominator policy {policy!r}")
    if policy == VALID_ONLY:
        scored = [t for t in triples if t.validity == VALID]
    else:
        scored = list(triples)
    if not scored:
        return None
    by_id = gold.by_id()
    correct = sum(1 for t in scored if _is_correct(t, by_id))
    return Fraction(correct, len(scored))


def average_precision(iteration_precisions: Sequence[Fraction]) -> Fraction:
    """Arithmetic mean of per-iteration precisions, exact."""
    if not iteration_precisions:
        raise EvaluationError("cannot average an empty list of precisions")
    values = [_as_fraction(p) for p in iteration_precisions]
    return sum(values, Fraction(0)) / len(values)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # shortest-repr decimal reading, so 0.630 means 63/100 exactly
        return Fraction(Decimal(repr(value)))
    if isinstance(value, str):
        return Fraction(Decimal(value))
    raise EvaluationError(f"cannot interpret {value!r} as a precision")


def format_precision(value: Fraction | None, places: int = 3) -> str:
    """Display rounding: half-up to ``places`` decimals; None prints as n/a."""
    if value is None:
        return "n/a"
    quantum = Decimal(1).scaleb(-places)
    as_decimal = Decimal(value.numerator) / Decimal(value.denominator)
    return str(as_decimal.quantize(quantum, rounding=ROUND_HALF_UP))


def evaluate_iterations(
    iteration_triples: Sequence[Sequence[SemanticTriple]],
    gold: GoldStandard,
    policy: str = ALL_PARSED,
) -> EvaluationReport:
    """Score each iteration and average the defined precisions."""
    if not iteration_triples:
        raise EvaluationError("no iterations to evaluate")
    precisions: list[Fraction | None] = []
    produced: list[int] = []
    correct: list[int] = []
    by_id = gold.by_id()
    for triples in iteration_triples:
        scored = [t for t in triples if policy == ALL_PARSED or t.validity == VALID]
        produced.append(len(scored))
        correct.append(sum(1 for t in scored if _is_correct(t, by_id)))
        precisions.append(Fraction(correct[-1], produced[-1]) if produced[-1] else None)
    defined = [p for p in precisions if p is not None]
    average = average_precision(defined) if defined else None
    return EvaluationReport(
        iteration_precisions=tuple(precisions),
        average_precision=average,
        produced_counts=tuple(produced),
        correct_counts=tuple(correct),
        denominator_policy=policy,
    )


def report_to_json(
    report: EvaluationReport,
    place: str | None = None,
    place_frequency: int | None = None,
    context_count: int | None = None,
) -> str:
    payload = {
        "place": place,
        "place_frequency": place_frequency,
        "context_count": context_count,
        "denominator_policy": report.denominator_policy,
        "iterations": [
            {
                "produced": produced,
                "correct": correct,
                "precision": None if p is None else [p.numerator, p.denominator],
                "precision_display": format_precision(p),
            }
            for produced, correct, p in zip(
                report.produced_counts, report.correct_counts, report.iteration_precisions
            )
        ],
        "average_precision": None
        if report.average_precision is None
        else [report.average_precision.numerator, report.average_precision.denominator],
        "average_precision_display": format_precision(report.average_precision),
    }
    return json.dumps(payload, indent=2) + "\n"


def render_report_table(
    report: EvaluationReport,
    place: str,
    place_frequency: int | None = None,
    context_count: int | None = None,
    relation: str = "near",
) -> str:
    """One-row text table: place, frequency, context count, precisions."""
    per_iteration = ", ".join(format_precision(p) for p in report.iteration_precisions)
    headers = [
        "Place name",
        "Frequency",
        f'Context Count with "{relation.capitalize()}"',
        "Average Precision",
    ]
    row = [
        place,
        "?" if place_frequency is None else f"{place_frequency:,}",
        "?" if context_count is None else str(context_count),
        f"({per_iteration}) = {format_precision(report.average_precision)}",
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
        "  ".join(v.ljust(w) for v, w in zip(row, widths)),
    ]
    return "\n".join(lines) + "\n"
