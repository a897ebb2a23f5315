"""KWIC search and entity co-occurrence filtering."""

from __future__ import annotations

import json
import random

import pytest

from spatrex.corpus import Corpus, Document, tokenize
from spatrex.concordance import (
    ConcordanceError,
    KwicHit,
    filter_by_cooccurrence,
    hits_to_jsonl,
    kwic_search,
    render_kwic_table,
)


def naive_kwic(corpus: Corpus, term: str, window: int) -> list[KwicHit]:
    """Full-rescan oracle: no caching, no cleverness."""
    folded = term.casefold()
    hits = []
    for doc in sorted(corpus.documents, key=lambda d: d.id):
        texts = [span.text for span in tokenize(doc.body)]
        for i, text in enumerate(texts):
            if text.casefold() == folded:
                hits.append(
                    KwicHit(
                        doc_id=doc.id,
                        match_index=i,
                        left=tuple(texts[max(0, i - window) : i]),
                        term=text,
                        right=tuple(texts[i + 1 : i + 1 + window]),
                    )
                )
    return hits


def make_corpus(bodies: dict[str, str]) -> Corpus:
    return Corpus([Document(id=doc_id, body=body) for doc_id, body in bodies.items()])


class TestKwicSearch:
    def test_windows_and_truncation(self):
        corpus = make_corpus({"d": "near the bridge the road runs near"})
        hits = kwic_search(corpus, "near", 3)
        assert len(hits) == 2
        first, second = hits
        assert first.left == () and first.right == ("the", "bridge", "the")
        assert second.left == ("the", "road", "runs") and second.right == ()
        assert second.match_index == 6

    def test_window_of_one(self):
        corpus = make_corpus({"d": "a near b"})
        (hit,) = kwic_search(corpus, "near", 1)
        assert hit.left == ("a",) and hit.right == ("b",)
        assert hit.rendered == "a near b"

    def test_case_insensitive_term_keeps_surface_form(self):
        corpus = make_corpus({"d": "Near the lake"})
        (hit,) = kwic_search(corpus, "near", 2)
        assert hit.term == "Near"

    def test_token_boundary_not_substring(self):
        corpus = make_corpus({"d": "nearly linear nearness near"})
        hits = kwic_search(corpus, "near", 2)
        assert [h.match_index for h in hits] == [3]

    def test_ordering_across_documents(self):
        corpus = make_corpus({"b": "x near y", "a": "p near q near r"})
        hits = kwic_search(corpus, "near", 1)
        assert [(h.doc_id, h.match_index) for h in hits] == [("a", 1), ("a", 3), ("b", 1)]

    def test_rejects_bad_window_and_multiword_term(self):
        corpus = make_corpus({"d": "a near b"})
        with pytest.raises(ConcordanceError, match="window"):
            kwic_search(corpus, "near", 0)
        with pytest.raises(ConcordanceError, match="single token"):
            kwic_search(corpus, "next to", 5)

    def test_matches_naive_oracle_on_fixture(self, fixture_corpus):
        assert kwic_search(fixture_corpus, "near", 15) == naive_kwic(fixture_corpus, "near", 15)

    def test_matches_naive_oracle_random(self):
        rng = random.Random(77)
        vocabulary = ["near", "lake", "fell", "keswick", "the", "a", "road"]
        for _ in range(150):
            bodies = {
                f"doc{j:02d}": " ".join(
                    rng.choice(vocabulary) for _ in range(rng.randint(1, 60))
                )
                for j in range(rng.randint(1, 6))
            }
            corpus = make_corpus(bodies)
            window = rng.randint(1, 8)
            assert kwic_search(corpus, "near", window) == naive_kwic(corpus, "near", window)

    def test_hit_count_equals_term_occurrences(self, fixture_corpus):
        total = sum(
            1
            for _, tokens in fixture_corpus.iter_doc_tokens()
            for span in tokens
            if span.folded == "near"
        )
        assert len(kwic_search(fixture_corpus, "near", 15)) == total


class TestFilterByCooccurrence:
    def test_fixture_keswick_count(self, keswick_hits):
        assert len(keswick_hits) == 84
        assert all(h.doc_id == "keswick_environs" for h in keswick_hits)

    def test_excludes_token_substrings(self):
        hits = [
            KwicHit(doc_id="d", match_index=1, left=("Keswickian",), term="near", right=("talk",)),
            KwicHit(doc_id="d", match_index=9, left=("by", "Keswick"), term="near", right=()),
        ]
        assert filter_by_cooccurrence(hits, "keswick") == [hits[1]]

    def test_multiword_entity_contiguous(self):
        hits = [
            KwicHit(doc_id="d", match_index=1, left=("Greta", "Hall"), term="near", right=()),
            KwicHit(doc_id="d", match_index=5, left=("Greta", "old", "Hall"), term="near", right=()),
        ]
        assert filter_by_cooccurrence(hits, "Greta Hall") == [hits[0]]

    def test_idempotent(self, keswick_hits):
        once = filter_by_cooccurrence(keswick_hits, "keswick")
        assert once == keswick_hits

    def test_preserves_order(self, keswick_hits):
        indices = [h.match_index for h in keswick_hits]
        assert indices == sorted(indices)

    def test_rejects_empty_entity(self):
        with pytest.raises(ConcordanceError, match="entity"):
            filter_by_cooccurrence([], "   ")


class TestSerialization:
    def test_jsonl_round_trip_fields(self, keswick_hits):
        lines = hits_to_jsonl(keswick_hits[:3]).splitlines()
        assert len(lines) == 3
        record = json.loads(lines[0])
        assert record["doc_id"] == "keswick_environs"
        assert record["term"].casefold() == "near"
        assert isinstance(record["left"], list) and isinstance(record["right"], list)

    def test_render_table_alignment(self):
        hits = [
            KwicHit(doc_id="d", match_index=3, left=("by", "the"), term="near", right=("lake",)),
            KwicHit(doc_id="d", match_index=9, left=("x",), term="near", right=("y", "z")),
        ]
        table = render_kwic_table(hits)
        lines = table.splitlines()
        assert len(lines) == 4
        assert lines[2].endswith("lake")
        assert "near" in lines[2] and "near" in lines[3]

    def test_render_table_empty(self):
        assert render_kwic_table([]) == "(no hits)\n"
