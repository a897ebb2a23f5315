"""Spatial relation extraction from plain-text corpora.

The package walks a corpus of text files, finds keyword-in-context windows
around a spatial relation term, asks a chat-completion model to extract
<subject, relation, object> triples from them, scores the output against a
gold standard, and exports the result as a weighted directed graph.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .concordance import KwicHit, filter_by_cooccurrence, kwic_search
from .config import ConfigError, PipelineConfig, load_config
from .corpus import (
    Corpus,
    CorpusError,
    Document,
    Gazetteer,
    PhraseMatcher,
    TokenSpan,
    corpus_stats,
    load_corpus,
    load_gazetteer,
    tokenize,
)
from .evaluation import EvaluationReport, GoldStandard, evaluate_iterations, load_gold, precision
from .graph import TripleGraph, build_graph, export
from .llm import (
    CompletionRequest,
    CompletionResponse,
    HttpBackend,
    Message,
    ReplayBackend,
    ScriptedBackend,
    complete,
)
from .prompting import PromptBatch, PromptSpec, build_prompts
from .triples import SemanticTriple, normalize_place, parse_triples, validate_triple

__all__ = [
    "__version__",
    "KwicHit",
    "filter_by_cooccurrence",
    "kwic_search",
    "ConfigError",
    "PipelineConfig",
    "load_config",
    "Corpus",
    "CorpusError",
    "Document",
    "Gazetteer",
    "PhraseMatcher",
    "TokenSpan",
    "corpus_stats",
    "load_corpus",
    "load_gazetteer",
    "tokenize",
    "EvaluationReport",
    "GoldStandard",
    "evaluate_iterations",
    "load_gold",
    "precision",
    "TripleGraph",
    "build_graph",
    "export",
    "CompletionRequest",
    "CompletionResponse",
    "HttpBackend",
    "Message",
    "ReplayBackend",
    "ScriptedBackend",
    "complete",
    "PromptBatch",
    "PromptSpec",
    "build_prompts",
    "SemanticTriple",
    "normalize_place",
    "parse_triples",
    "validate_triple",
]
