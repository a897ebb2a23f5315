"""End-to-end orchestration: search, prompt, complete, parse, validate.

This is the glue the CLI drives.  Iterations run sequentially with identical
prompts; inside an iteration, batch completions may run on a bounded thread
pool (http/replay backends only; scripted backends consume responses in
order, so they always run sequentially).  Responses are reassembled by batch
index, which keeps outputs deterministic regardless of completion order.

Context identity: the filtered passages get global numbers 1..N, and a
triple's provenance is carried as that global number.  Gold standards use the
same numbers (as strings) for their ``context_id`` column; ``contexts.csv``
written by the CLI is the authoring aid that lists them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import llm
from .concordance import KwicHit, filter_by_cooccurrence, kwic_search
from .config import ConfigError, PipelineConfig
from .corpus import Corpus
from .prompting import PromptBatch
from .triples import SemanticTriple, parse_triples, validate_triple

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterationResult:
    """One prompt iteration: raw responses plus validated triples."""

    responses: tuple[llm.CompletionResponse, ...]
    triples: tuple[SemanticTriple, ...]
    skipped_fragments: tuple[tuple[int, str, str], ...]  # (batch_index, raw, reason)
    not_found_count: int


def make_backend(config: PipelineConfig):
    """Build the llm backend selected by the config."""
    if config.backend == "replay":
        return llm.ReplayBackend.from_file(config.cassette_path)
    if config.backend == "scripted":
        path = Path(config.scripted_responses_path)
        try:
            contents = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scripted responses {path}: {exc}") from exc
        if not isinstance(contents, list) or not all(isinstance(c, str) for c in contents):
            raise ConfigError(f"{path} must hold a JSON list of strings")
        return llm.ScriptedBackend(contents)
    if config.backend == "http":
        return llm.HttpBackend(
            endpoint=config.endpoint,
            api_key=config.api_key(),
            timeout=config.timeout,
        )
    raise ConfigError(f"unknown backend {config.backend!r}")


def filtered_contexts(corpus: Corpus, config: PipelineConfig) -> list[KwicHit]:
    """KWIC hits for the relation term, narrowed to the target entity."""
    hits = kwic_search(corpus, config.relation, config.window)
    return filter_by_cooccurrence(hits, config.entity)


def _complete_batches(
    batches: Sequence[PromptBatch],
    backend,
    config: PipelineConfig,
) -> list[llm.CompletionResponse]:
    def one(batch: PromptBatch) -> llm.CompletionResponse:
        request = llm.user_request(
            model=config.model,
            content=batch.content,
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
        )
        response = llm.complete(request, backend)
        if config.record and config.cassette_path:
            llm.record(request, response, config.cassette_path)
        return response

    workers = 1 if getattr(backend, "order_dependent", False) else config.parallelism
    if workers <= 1 or len(batches) <= 1:
        return [one(batch) for batch in batches]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(one, batches))


def _globalize(
    parsed: Sequence[SemanticTriple],
    batch: PromptBatch,
) -> tuple[list[SemanticTriple], list[SemanticTriple]]:
    """Map per-batch passage numbers to global numbers; split off unmappable."""
    mapped: list[SemanticTriple] = []
    unmapped: list[SemanticTriple] = []
    for triple in parsed:
        local = triple.passage_number
        if local is not None and 1 <= local <= len(batch.passage_refs):
            global_number = batch.passage_refs[local - 1][0]
            mapped.append(
                SemanticTriple(
                    subject=triple.subject,
                    relation=triple.relation,
                    object=triple.object,
                    passage_number=global_number,
                    batch_index=batch.batch_index,
                )
            )
        else:
            unmapped.append(
                SemanticTriple(
                    subject=triple.subject,
                    relation=triple.relation,
                    object=triple.object,
                    passage_number=None,
                    batch_index=batch.batch_index,
                )
            )
    return mapped, unmapped


def run_iteration(
    batches: Sequence[PromptBatch],
    backend,
    config: PipelineConfig,
) -> IterationResult:
    """Send every batch once, then parse, globalize and validate the output."""
    responses = _complete_batches(batches, backend, config)
    triples: list[SemanticTriple] = []
    skipped: list[tuple[int, str, str]] = []
    not_found = 0
    for batch, response in zip(batches, responses):
        report = parse_triples(response.content)
        not_found += report.not_found_count
        for raw, reason in report.skipped_fragments:
            skipped.append((batch.batch_index, raw, reason))
        mapped, unmapped = _globalize(report.triples, batch)
        for triple in unmapped:
            skipped.append(
                (
                    batch.batch_index,
                    f"<{triple.subject}, {triple.relation}, {triple.object}>",
                    "passage label missing or out of range",
                )
            )
        for triple in mapped:
            triples.append(validate_triple(triple, config.relation, config.entity))
    return IterationResult(
        responses=tuple(responses),
        triples=tuple(triples),
        skipped_fragments=tuple(skipped),
        not_found_count=not_found,
    )


def run_extraction(
    batches: Sequence[PromptBatch],
    backend,
    config: PipelineConfig,
) -> list[IterationResult]:
    """Run the configured number of identical-prompt iterations sequentially."""
    results: list[IterationResult] = []
    for iteration in range(config.iterations):
        logger.info("extraction iteration %d/%d", iteration + 1, config.iterations)
        results.append(run_iteration(batches, backend, config))
    return results


def contexts_to_csv(hits: Sequence[KwicHit]) -> str:
    """Context listing used to author gold files: global number per passage."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("context_id", "doc_id", "match_index", "passage"))
    for number, hit in enumerate(hits, start=1):
        writer.writerow((number, hit.doc_id, hit.match_index, hit.rendered))
    return buffer.getvalue()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def corpus_hash(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for doc in corpus.documents:
        digest.update(doc.id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(doc.body.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


def config_hash(config: PipelineConfig) -> str:
    """Hash of the extraction-relevant settings only.

    Environment-specific paths are excluded; the corpus and cassette get
    their own content hashes in the run manifest, so two runs of the same
    pipeline into different directories hash identically.
    """
    semantic = {
        "relation": config.relation,
        "entity": config.entity,
        "window": config.window,
        "max_prompt_tokens": config.max_prompt_tokens,
        "iterations": config.iterations,
        "not_found_clause": config.not_found_clause,
        "backend": config.backend,
        "model": config.model,
        "temperature": config.temperature,
        "max_output_tokens": config.max_output_tokens,
    }
    return sha256_bytes(json.dumps(semantic, sort_keys=True).encode("utf-8"))
