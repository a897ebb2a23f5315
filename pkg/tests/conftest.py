"""Shared fixtures: the Lake District corpus and its scripted model answers.

The fixture corpus has exactly 84 "near" contexts mentioning Keswick (74
genuine place-near-place sentences, 10 where "near" is temporal).  The canned
model answers the gold pair for contexts 1..60, a wrong place for later true
contexts and a spurious pair for the temporal ones, which pins the correct
count at 53 of 84 produced.
"""

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from spatrex import llm
from spatrex.concordance import KwicHit, filter_by_cooccurrence, kwic_search
from spatrex.corpus import Corpus, Gazetteer, load_corpus, load_gazetteer
from spatrex.prompting import PromptBatch, PromptSpec, build_prompts

DATA_DIR = Path(__file__).parent / "data"
CORPUS_DIR = DATA_DIR / "corpus"
PLACES_PATH = DATA_DIR / "places.txt"
GEO_NOUNS_PATH = DATA_DIR / "geo_nouns.txt"
GOLD_PATH = DATA_DIR / "gold_keswick84.csv"
SCRIPTED_NOT_FOUND_PATH = DATA_DIR / "scripted_not_found.json"

# scripted answers are correct for true contexts up to this id; see gold file
CORRECT_UP_TO = 60
WRONG_SUBJECT = "Penrith"
SPURIOUS_SUBJECT = "Crow Park"

# verdict lines collected by the acceptance tests, echoed after the run
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    return load_corpus(CORPUS_DIR)


@pytest.fixture(scope="session")
def fixture_gazetteer() -> Gazetteer:
    return load_gazetteer(PLACES_PATH, GEO_NOUNS_PATH)


@pytest.fixture(scope="session")
def keswick_hits(fixture_corpus) -> list[KwicHit]:
    hits = kwic_search(fixture_corpus, "near", 15)
    return filter_by_cooccurrence(hits, "keswick")


def gold_table(path: Path = GOLD_PATH) -> dict[int, tuple[bool, str]]:
    """context_id -> (relation_holds, display-case subject or "")."""
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))[1:]
    return {int(row[0]): (row[1] == "true", row[2]) for row in rows}


def scripted_subject(context_id: int, table: dict[int, tuple[bool, str]]) -> str:
    holds, subject = table[context_id]
    if not holds:
        return SPURIOUS_SUBJECT
    if context_id <= CORRECT_UP_TO:
        return subject
    return WRONG_SUBJECT


def response_for_batch(batch: PromptBatch, table: dict[int, tuple[bool, str]]) -> str:
    """Canned model output for one batch, numbered in batch-local order."""
    return "".join(
        f"({local}) <{scripted_subject(global_number, table)}, near, Keswick>"
        for local, (global_number, _) in enumerate(batch.passage_refs, start=1)
    )


def keswick_batches(hits, max_prompt_tokens: int = 1200) -> list[PromptBatch]:
    spec = PromptSpec(relation="near", entity="keswick", max_prompt_tokens=max_prompt_tokens)
    return build_prompts(hits, spec)


def write_cassette(
    path: Path,
    batches,
    table,
    model: str = "gpt-4",
    temperature: float = 0.0,
) -> Path:
    """Record the canned answer for every batch so replay can serve it."""
    for batch in batches:
        content = response_for_batch(batch, table)
        request = llm.user_request(model=model, content=batch.content, temperature=temperature)
        response = llm.CompletionResponse(
            content=content,
            finish_reason=llm.FINISH_STOP,
            usage=llm.Usage(
                prompt_tokens=len(batch.content.encode("utf-8")) // 4,
                output_tokens=len(content.encode("utf-8")) // 4,
            ),
        )
        llm.record(request, response, path)
    return path


def write_scripted(path: Path, batches, table) -> Path:
    """One canned response per batch, in batch order, as the scripted file."""
    import json

    contents = [response_for_batch(batch, table) for batch in batches]
    path.write_text(json.dumps(contents), encoding="utf-8")
    return path


def validate_gexf_structure(data: bytes) -> None:
    """Assert the export is well-formed GEXF 1.2draft with coherent ids.

    Offline stand-in for schema validation: checks namespace, version, the
    static directed graph element, unique node ids, edge referential
    integrity, positive float weights and the relation attvalue on each edge.
    """
    import xml.etree.ElementTree as ET

    ns = "{http://www.gexf.net/1.2draft}"
    root = ET.fromstring(data)
    assert root.tag == f"{ns}gexf"
    assert root.get("version") == "1.2"
    graph_el = root.find(f"{ns}graph")
    assert graph_el is not None
    assert graph_el.get("defaultedgetype") == "directed"
    assert graph_el.get("mode") == "static"

    attributes = graph_el.find(f"{ns}attributes")
    assert attributes is not None and attributes.get("class") == "edge"
    attribute = attributes.find(f"{ns}attribute")
    assert attribute.get("id") == "0" and attribute.get("title") == "relation"

    node_ids: set[str] = set()
    for node in graph_el.find(f"{ns}nodes") or ():
        node_id = node.get("id")
        assert node_id is not None and node_id not in node_ids
        assert node.get("label")
        node_ids.add(node_id)

    edge_ids: set[str] = set()
    for edge in graph_el.find(f"{ns}edges") or ():
        edge_id = edge.get("id")
        assert edge_id is not None and edge_id not in edge_ids
        edge_ids.add(edge_id)
        assert edge.get("source") in node_ids
        assert edge.get("target") in node_ids
        assert float(edge.get("weight")) > 0
        attvalue = edge.find(f"{ns}attvalues/{ns}attvalue")
        assert attvalue is not None and attvalue.get("for") == "0"
        assert attvalue.get("value")


def parse_dot(data: bytes) -> tuple[list[str], list[tuple[str, str, str, int]]]:
    """Parse our DOT dialect; assert on anything unrecognized.

    Returns (node labels, edges as (source, target, label, penwidth)).
    """
    import re

    quoted = r'"((?:[^"\\]|\\.)*)"'
    node_re = re.compile(rf"^  {quoted};$")
    edge_re = re.compile(
        rf"^  {quoted} -> {quoted} \[label={quoted}, penwidth=(\d+)\];$"
    )

    def unescape(value: str) -> str:
        return value.replace('\\"', '"').replace("\\\\", "\\")

    lines = data.decode("utf-8").splitlines()
    assert lines[0] == "digraph triples {"
    assert lines[-1] == "}"
    nodes: list[str] = []
    edges: list[tuple[str, str, str, int]] = []
    for line in lines[1:-1]:
        node_match = node_re.match(line)
        if node_match:
            nodes.append(unescape(node_match.group(1)))
            continue
        edge_match = edge_re.match(line)
        assert edge_match, f"unparseable DOT line: {line!r}"
        source, target, label, penwidth = edge_match.groups()
        edges.append((unescape(source), unescape(target), unescape(label), int(penwidth)))
    return nodes, edges
