"""Keyword-in-context search and co-occurrence filtering.

``kwic_search`` finds every occurrence of a single-token relation term and
captures up to ``window`` word tokens on each side.  Windows are counted in
word tokens (punctuation is never a token) and are truncated, not padded, at
document boundaries.  ``filter_by_cooccurrence`` then keeps only the hits
whose rendered passage mentions a target entity at token boundaries, which is
how a relation term's context list is narrowed to one place of interest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, tokenize


class ConcordanceError(Exception):
    """Raised for unusable search terms."""


@dataclass(frozen=True)
class KwicHit:
    """One keyword-in-context match with its provenance."""

    doc_id: str
    match_index: int
    left: tuple[str, ...]
    term: str
    right: tuple[str, ...]

    @property
    def rendered(self) -> str:
        """The passage as plain text: left window, term, right window."""
        return " ".join((*self.left, self.term, *self.right))

    @property
    def window_tokens(self) -> tuple[str, ...]:
        return (*self.left, self.term, *self.right)


def kwic_search(corpus: Corpus, term: str, window: int) -> list[KwicHit]:
    """Find all occurrences of ``term`` with up to ``window`` tokens per side.

    Hits are ordered by ``(doc_id, match_index)``.  Multi-token terms are
    rejected: windowing is defined over single relation-term tokens.
    """
    if window < 1:
        raise ConcordanceError("window must be >= 1")
    term_tokens = tokenize(term)
    if len(term_tokens) != 1:
        raise ConcordanceError(f"term must be a single token, got {term!r}")
    folded_term = term_tokens[0].folded

    hits: list[KwicHit] = []
    for doc, tokens in corpus.iter_doc_tokens():
        texts = [span.text for span in tokens]
        for i, span in enumerate(tokens):
            if span.folded != folded_term:
                continue
            left = tuple(texts[max(0, i - window) : i])
            right = tuple(texts[i + 1 : i + 1 + window])
            hits.append(
                KwicHit(doc_id=doc.id, match_index=i, left=left, term=span.text, right=right)
            )
    hits.sort(key=lambda h: (h.doc_id, h.match_index))
    return hits


def filter_by_cooccurrence(hits: Sequence[KwicHit], entity: str) -> list[KwicHit]:
    """Keep hits whose window contains ``entity`` as a token-boundary match.

    The entity may be multiword; matching is case-insensitive and contiguous
    over the window's tokens, so "Keswick" does not match inside "Keswickian".
    Input order is preserved.
    """
    if not entity.strip():
        raise ConcordanceError("entity must be non-empty")
    entity_tokens = tuple(span.folded for span in tokenize(entity))
    if not entity_tokens:
        raise ConcordanceError(f"entity {entity!r} contains no tokens")

    kept: list[KwicHit] = []
    k = len(entity_tokens)
    for hit in hits:
        folded = tuple(text.casefold() for text in hit.window_tokens)
        if any(folded[i : i + k] == entity_tokens for i in range(len(folded) - k + 1)):
            kept.append(hit)
    return kept


def hit_to_json(hit: KwicHit) -> str:
    """One JSON Lines record for a hit."""
    return json.dumps(
        {
            "doc_id": hit.doc_id,
            "match_index": hit.match_index,
            "left": list(hit.left),
            "term": hit.term,
            "right": list(hit.right),
        },
        ensure_ascii=False,
    )


def hits_to_jsonl(hits: Iterable[KwicHit]) -> str:
    return "".join(hit_to_json(hit) + "\n" for hit in hits)


def render_kwic_table(hits: Sequence[KwicHit]) -> str:
    """Three-column concordance table: left context, term, right context."""
    if not hits:
        return "(no hits)\n"
    left_cells = [" ".join(h.left) for h in hits]
    term_cells = [h.term for h in hits]
    left_width = max(len(cell) for cell in left_cells)
    term_width = max(len(cell) for cell in term_cells)
    lines = [
        f"{'Left'.rjust(left_width)}  {'Term'.center(term_width)}  Right",
        f"{'-' * left_width}  {'-' * term_width}  -----",
    ]
    for left, term, hit in zip(left_cells, term_cells, hits):
        lines.append(f"{left.rjust(left_width)}  {term.center(term_width)}  {' '.join(hit.right)}")
    return "\n".join(lines) + "\n"
