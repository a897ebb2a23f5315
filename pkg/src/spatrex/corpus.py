"""Plain-text corpus ingestion, tokenization, gazetteers and corpus statistics.

Documents are read from a directory of ``.txt`` files (one document per file,
ids derived from filenames) with angle-bracket markup stripped on ingest, so
downstream search and prompting always operate on prose.  Tokenization is a
fixed, deterministic rule: a token is a maximal run of letters/digits,
optionally joined by internal apostrophes or hyphens ("church-yard", "don't");
punctuation never becomes a token.  Matching everywhere is case-insensitive
via ``str.casefold``.

Gazetteers are line-oriented lists of place names and geographic feature
nouns.  Multiword names ("Greta Hall") are matched over the token stream with
a longest-match, non-overlapping, left-to-right rule so that "Hall" is not
double-counted inside "Greta Hall".
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class CorpusError(Exception):
    """Raised for unreadable inputs, duplicate ids and empty corpora."""


# A token is one or more word characters (letters/digits, underscore excluded)
# optionally chained by single internal apostrophes or hyphens.
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*", re.UNICODE)

# SGML/XML-ish tags, comments, declarations and processing instructions.
_MARKUP_RE = re.compile(
    r"<!--.*?-->|</?[A-Za-z][^<>]*>|<![A-Za-z][^<>]*>|<\?[^<>]*\?>",
    re.DOTALL,
)


@dataclass(frozen=True)
class Document:
    """One ingested text file."""

    id: str
    body: str
    title: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.body:
            raise CorpusError(f"document {self.id!r} has an empty body")


@dataclass(frozen=True)
class TokenSpan:
    """A single token with its byte offsets into the document body."""

    text: str
    byte_start: int
    byte_end: int
    index: int

    @property
    def folded(self) -> str:
        return self.text.casefold()


@dataclass(frozen=True)
class Gazetteer:
    """Curated place names plus geographic feature nouns.

    ``place_names`` and ``geographic_nouns`` hold the display forms as listed
    in the source files; lookups are case-insensitive.
    """

    place_names: tuple[str, ...] = ()
    geographic_nouns: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusStats:
    file_count: int
    word_count: int
    unique_word_forms: int
    named_place_occurrences: int
    geographic_noun_occurrences: int
    relation_term_occurrences: Mapping[str, int]


class Corpus:
    """An immutable set of documents with per-document token caching.

    Safe to share across threads for reads: tokenization is deterministic, so
    concurrent cache fills for the same document produce identical values.
    """

    def __init__(self, documents: Sequence[Document]):
        if not documents:
            raise CorpusError("no documents found")
        self._by_id: dict[str, Document] = {}
        for doc in documents:
            if doc.id in self._by_id:
                raise CorpusError(f"duplicate document id: {doc.id!r}")
            self._by_id[doc.id] = doc
        self._documents = tuple(documents)
        self._token_cache: dict[str, tuple[TokenSpan, ...]] = {}

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    @property
    def file_count(self) -> int:
        return len(self._documents)

    def document(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id: {doc_id!r}") from None

    def tokens(self, doc_id: str) -> tuple[TokenSpan, ...]:
        cached = self._token_cache.get(doc_id)
        if cached is None:
            cached = tuple(tokenize(self.document(doc_id).body))
            self._token_cache[doc_id] = cached
        return cached

    def iter_doc_tokens(self) -> Iterator[tuple[Document, tuple[TokenSpan, ...]]]:
        for doc in self._documents:
            yield doc, self.tokens(doc.id)


def tokenize(body: str) -> list[TokenSpan]:
    """Split ``body`` into token spans with UTF-8 byte offsets.

    Offsets satisfy ``body.encode()[t.byte_start:t.byte_end].decode() == t.text``.
    """
    spans: list[TokenSpan] = []
    prev_char = 0
    prev_byte = 0
    for index, match in enumerate(_TOKEN_RE.finditer(body)):
        start_byte = prev_byte + len(body[prev_char : match.start()].encode("utf-8"))
        text = match.group(0)
        end_byte = start_byte + len(text.encode("utf-8"))
        spans.append(TokenSpan(text=text, byte_start=start_byte, byte_end=end_byte, index=index))
        prev_char = match.end()
        prev_byte = end_byte
    return spans


def strip_markup(text: str) -> str:
    """Remove tags from geoparsed/markup-bearing text, keeping the prose."""
    stripped = _MARKUP_RE.sub(" ", text)
    return html.unescape(stripped)


def _read_manifest(path: Path) -> list[tuple[str, str, str]]:
    entries: list[tuple[str, str, str]] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            doc_id, filename = parts
            encoding = "utf-8"
        elif len(parts) == 3:
            doc_id, filename, encoding = parts
        else:
            raise CorpusError(f"{path}:{lineno}: manifest line must be id<TAB>filename[<TAB>encoding]")
        if not doc_id.strip():
            raise CorpusError(f"{path}:{lineno}: empty document id in manifest")
        entries.append((doc_id.strip(), filename.strip(), encoding.strip() or "utf-8"))
    if not entries:
        raise CorpusError(f"manifest {path} lists no documents")
    return entries


def load_corpus(root_path: str | Path, manifest: str | Path | None = None) -> Corpus:
    """Ingest a directory of ``.txt`` files into a :class:`Corpus`.

    Without a manifest, every ``*.txt`` under ``root_path`` is read as UTF-8 in
    sorted filename order and the id is the filename without its extension.  A
    manifest (``id<TAB>filename`` per line, optional third column naming an
    8-bit encoding) pins ids, ingest set and encodings explicitly.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a directory: {root}")

    if manifest is not None:
        plan = _read_manifest(Path(manifest))
    else:
        plan = [(p.stem, p.name, "utf-8") for p in sorted(root.glob("*.txt"))]

    documents: list[Document] = []
    for doc_id, filename, encoding in plan:
        path = root / filename
        try:
            raw = path.read_bytes().decode(encoding)
        except (OSError, UnicodeDecodeError, LookupError) as exc:
            raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
        body = strip_markup(raw)
        if not body.strip():
            raise CorpusError(f"corpus file {path} is empty after markup stripping")
        documents.append(Document(id=doc_id, body=body, title=doc_id))
    if not documents:
        raise CorpusError("no documents found")
    return Corpus(documents)


def load_gazetteer_file(path: str | Path) -> list[str]:
    """Read one entry per line; ``#`` comments and blank lines are skipped."""
    entries: list[str] = []
    seen: set[str] = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        folded = line.casefold()
        if folded in seen:
            continue
        seen.add(folded)
        entries.append(line)
    return entries


def load_gazetteer(
    place_names_path: str | Path | None = None,
    geographic_nouns_path: str | Path | None = None,
) -> Gazetteer:
    places = load_gazetteer_file(place_names_path) if place_names_path else []
    nouns = load_gazetteer_file(geographic_nouns_path) if geographic_nouns_path else []
    return Gazetteer(place_names=tuple(places), geographic_nouns=tuple(nouns))


class PhraseMatcher:
    """Longest-match, non-overlapping, left-to-right phrase matching.

    Entries are tokenized with the corpus tokenizer and compared casefolded,
    so "GRETA HALL" in text matches the entry "Greta Hall".
    """

    def __init__(self, entries: Iterable[str]):
        self._by_first: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for entry in entries:
            tokens = tuple(span.folded for span in tokenize(entry))
            if not tokens:
                continue
            self._by_first.setdefault(tokens[0], []).append((tokens, entry))
        for candidates in self._by_first.values():
            # longest first, then lexicographic for a deterministic tie-break
            candidates.sort(key=lambda item: (-len(item[0]), item[0]))

    def find(self, tokens: Sequence[TokenSpan]) -> list[tuple[int, int, str]]:
        """Return ``(start_index, length, entry)`` matches over a token stream."""
        matches: list[tuple[int, int, str]] = []
        folded = [span.folded for span in tokens]
        i = 0
        n = len(folded)
        while i < n:
            candidates = self._by_first.get(folded[i])
            matched = False
            if candidates:
                for phrase, entry in candidates:
                    k = len(phrase)
                    if i + k <= n and tuple(folded[i : i + k]) == phrase:
                        matches.append((i, k, entry))
                        i += k
                        matched = True
                        break
            if not matched:
                i += 1
        return matches


def corpus_stats(
    corpus: Corpus,
    gazetteer: Gazetteer,
    relation_terms: Sequence[str],
) -> CorpusStats:
    """Compute corpus-level counts of words, places, nouns and relation terms.

    ``word_count`` is the total token count, ``unique_word_forms`` the number
    of distinct casefolded token texts.  Place and noun occurrences use the
    longest-match phrase rule; relation terms are counted as exact casefolded
    single-token matches.
    """
    place_matcher = PhraseMatcher(gazetteer.place_names)
    noun_matcher = PhraseMatcher(gazetteer.geographic_nouns)
    folded_terms = {term.casefold(): term for term in relation_terms}

    word_count = 0
    forms: set[str] = set()
    place_occurrences = 0
    noun_occurrences = 0
    term_counts = {term: 0 for term in relation_terms}

    for _, tokens in corpus.iter_doc_tokens():
        word_count += len(tokens)
        for span in tokens:
            forms.add(span.folded)
            term = folded_terms.get(span.folded)
            if term is not None:
                term_counts[term] += 1
        place_occurrences += len(place_matcher.find(tokens))
        noun_occurrences += len(noun_matcher.find(tokens))

    return CorpusStats(
        file_count=corpus.file_count,
        word_count=word_count,
        unique_word_forms=len(forms),
        named_place_occurrences=place_occurrences,
        geographic_noun_occurrences=noun_occurrences,
        relation_term_occurrences=term_counts,
    )


def place_frequencies(corpus: Corpus, gazetteer: Gazetteer) -> list[tuple[str, int]]:
    """Count longest-match occurrences per gazetteer place across the corpus.

    Sorted by count descending, ties broken lexicographically by place label.
    Entries that never occur are kept with a zero count.
    """
    if not gazetteer.place_names:
        raise CorpusError("gazetteer has no place names")
    matcher = PhraseMatcher(gazetteer.place_names)
    counts = {name: 0 for name in gazetteer.place_names}
    for _, tokens in corpus.iter_doc_tokens():
        for _, _, entry in matcher.find(tokens):
            counts[entry] += 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


def render_stats_table(stats: CorpusStats) -> str:
    """Plain-text two-column summary table of corpus statistics."""
    rows: list[tuple[str, str]] = [
        ("Text Files", f"{stats.file_count:,}"),
        ("Words", f"{stats.word_count:,}"),
        ("Unique Word Forms", f"{stats.unique_word_forms:,}"),
        ("Named Places", f"{stats.named_place_occurrences:,}"),
        ("Geographic Nouns", f"{stats.geographic_noun_occurrences:,}"),
    ]
    for term, count in stats.relation_term_occurrences.items():
        rows.append((f'"{term.capitalize()}" Relation Occurrences', f"{count:,}"))
    width = max(len(name) for name, _ in rows)
    lines = [f"{'Parameter'.ljust(width)}  Count", f"{'-' * width}  -----"]
    for name, value in rows:
        lines.append(f"{name.ljust(width)}  {value}")
    return "\n".join(lines) + "\n"
