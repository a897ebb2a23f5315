"""Command-line pipeline: stats, kwic, freq, extract, eval, graph, pipeline.

Each subcommand reads an optional INI config plus flag overrides, writes its
delimited outputs (JSON/CSV/text tables) into the output directory, and the
report-style commands render a matplotlib figure next to them.  Exit codes:
0 success, 1 configuration or input error, 2 model-backend failure, 3
evaluation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, figures, graph as graphmod, pipeline
from .concordance import (
    ConcordanceError,
    filter_by_cooccurrence,
    hits_to_jsonl,
    kwic_search,
    render_kwic_table,
)
from .config import ConfigError, PipelineConfig, apply_overrides, load_config
from .corpus import (
    CorpusError,
    corpus_stats,
    load_corpus,
    load_gazetteer,
    place_frequencies,
    render_stats_table,
)
from .evaluation import (
    EvaluationError,
    GoldFormatError,
    evaluate_iterations,
    load_gold,
    render_report_table,
    report_to_json,
)
from .graph import GraphError
from .llm import CompletionError
from .prompting import PromptError, PromptSpec, batches_to_json, build_prompts, load_template
from .triples import (
    TripleFormatError,
    VALID,
    read_triples_csv,
    triples_to_csv,
    triples_to_jsonl,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BACKEND = 2
EXIT_EVAL = 3


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file; flags override its values")
    parser.add_argument("--corpus-root", dest="corpus_root", help="directory of .txt files")
    parser.add_argument("--manifest", dest="manifest_path", help="id<TAB>filename manifest")
    parser.add_argument("--place-names", dest="place_names_path", help="place gazetteer file")
    parser.add_argument(
        "--geographic-nouns", dest="geographic_nouns_path", help="geographic noun list file"
    )
    parser.add_argument("--relation", help="relation term to search (default near)")
    parser.add_argument("--entity", help="target place entity")
    parser.add_argument("--window", type=int, help="context window in tokens per side")
    parser.add_argument(
        "--max-prompt-tokens", dest="max_prompt_tokens", type=int, help="prompt token budget"
    )
    parser.add_argument("--iterations", type=int, help="number of prompt iterations")
    parser.add_argument("--template", dest="template_path", help="instruction template file")
    parser.add_argument(
        "--not-found-clause",
        dest="not_found_clause",
        action="store_const",
        const=True,
        help="append the low-confidence opt-out clause to prompts",
    )
    parser.add_argument("--backend", choices=("http", "replay", "scripted"))
    parser.add_argument("--endpoint", help="chat-completions URL for backend=http")
    parser.add_argument("--model", help="model name sent on the wire")
    parser.add_argument("--api-key-env", dest="api_key_env", help="env var holding the API key")
    parser.add_argument("--cassette", dest="cassette_path", help="cassette JSONL path")
    parser.add_argument(
        "--scripted-responses",
        dest="scripted_responses_path",
        help="JSON list of canned responses for backend=scripted",
    )
    parser.add_argument("--temperature", type=float, help="sampling temperature (default 0)")
    parser.add_argument(
        "--max-output-tokens", dest="max_output_tokens", type=int, help="completion token cap"
    )
    parser.add_argument("--timeout", type=float, help="per-request timeout seconds")
    parser.add_argument("--parallelism", type=int, help="max in-flight requests")
    parser.add_argument(
        "--record",
        action="store_const",
        const=True,
        help="record live responses into the cassette (backend=http)",
    )
    parser.add_argument("--output", dest="output_dir", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatrex",
        description="Extract, score and graph spatial relations between places in a text corpus.",
    )
    parser.add_argument("--version", action="version", version=f"spatrex {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    specs = {
        "stats": "corpus statistics (words, places, relation-term counts)",
        "kwic": "keyword-in-context search for the relation term",
        "freq": "place-name frequency table and chart",
        "extract": "prompt the model and parse triples",
        "eval": "score extracted triples against a gold standard",
        "graph": "build and export the weighted triple graph",
        "pipeline": "run the whole thing end to end",
    }
    for name, help_text in specs.items():
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_options(sub)
        if name == "kwic":
            sub.add_argument(
                "--filtered",
                action="store_true",
                help="keep only hits co-occurring with the target entity",
            )
        if name in ("eval", "pipeline"):
            sub.add_argument("--gold", help="gold standard CSV path")
            sub.add_argument(
                "--policy",
                choices=("all_parsed", "valid_only"),
                default="all_parsed",
                help="precision denominator policy",
            )
        if name in ("eval", "graph"):
            sub.add_argument(
                "--triples",
                action="append",
                help="triples CSV (repeat per iteration; default: output dir iter files)",
            )
    return parser


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = PipelineConfig(corpus_root="", entity="")
    overrides = {
        key: getattr(args, key)
        for key in (
            "corpus_root",
            "manifest_path",
            "place_names_path",
            "geographic_nouns_path",
            "relation",
            "entity",
            "window",
            "max_prompt_tokens",
            "iterations",
            "template_path",
            "not_found_clause",
            "backend",
            "endpoint",
            "model",
            "api_key_env",
            "cassette_path",
            "scripted_responses_path",
            "temperature",
            "max_output_tokens",
            "timeout",
            "parallelism",
            "record",
            "output_dir",
        )
        if hasattr(args, key)
    }
    return apply_overrides(config, **overrides)


def _outdir(config: PipelineConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_inputs(config: PipelineConfig):
    corpus = load_corpus(config.corpus_root, config.manifest_path)
    gazetteer = load_gazetteer(config.place_names_path, config.geographic_nouns_path)
    return corpus, gazetteer


def _prompt_spec(config: PipelineConfig) -> PromptSpec:
    template_kwargs = {}
    if config.template_path:
        template_kwargs["instruction_template"] = load_template(config.template_path)
    return PromptSpec(
        relation=config.relation,
        entity=config.entity,
        include_not_found_clause=config.not_found_clause,
        max_prompt_tokens=config.max_prompt_tokens,
        **template_kwargs,
    )


def cmd_stats(config: PipelineConfig) -> int:
    config.validate(require_corpus=True)
    corpus, gazetteer = _load_inputs(config)
    stats = corpus_stats(corpus, gazetteer, [config.relation])
    outdir = _outdir(config)
    payload = {
        "file_count": stats.file_count,
        "word_count": stats.word_count,
        "unique_word_forms": stats.unique_word_forms,
        "named_place_occurrences": stats.named_place_occurrences,
        "geographic_noun_occurrences": stats.geographic_noun_occurrences,
        "relation_term_occurrences": dict(stats.relation_term_occurrences),
    }
    (outdir / "stats.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    table = render_stats_table(stats)
    (outdir / "stats.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_kwic(config: PipelineConfig, filtered: bool) -> int:
    config.validate(require_corpus=True, require_entity=filtered)
    corpus, _ = _load_inputs(config)
    hits = kwic_search(corpus, config.relation, config.window)
    if filtered:
        hits = filter_by_cooccurrence(hits, config.entity)
    outdir = _outdir(config)
    (outdir / "hits.jsonl").write_text(hits_to_jsonl(hits), encoding="utf-8")
    table = render_kwic_table(hits)
    (outdir / "hits.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    logger.info("%d hits for %r (window %d)", len(hits), config.relation, config.window)
    return EXIT_OK


def cmd_freq(config: PipelineConfig) -> int:
    config.validate(require_corpus=True, require_places=True)
    corpus, gazetteer = _load_inputs(config)
    frequencies = place_frequencies(corpus, gazetteer)
    outdir = _outdir(config)
    lines = ["place,count"] + [
        f"{json.dumps(place) if ',' in place or chr(34) in place else place},{count}"
        for place, count in frequencies
    ]
    (outdir / "frequencies.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    figures.save_frequency_figure(frequencies, outdir / "frequencies.png")
    for place, count in frequencies[:10]:
        sys.stdout.write(f"{place}\t{count}\n")
    return EXIT_OK


def _write_iteration_files(outdir: Path, number: int, result: pipeline.IterationResult) -> None:
    responses_payload = "".join(
        json.dumps(
            {
                "batch_index": i,
                "content": response.content,
                "finish_reason": response.finish_reason,
                "usage": None
                if response.usage is None
                else {
                    "prompt_tokens": response.usage.prompt_tokens,
                    "output_tokens": response.usage.output_tokens,
                },
            },
            ensure_ascii=False,
        )
        + "\n"
        for i, response in enumerate(result.responses)
    )
    (outdir / f"responses.iter{number}.jsonl").write_text(responses_payload, encoding="utf-8")
    (outdir / f"triples.iter{number}.csv").write_text(
        triples_to_csv(result.triples), encoding="utf-8"
    )
    (outdir / f"triples.iter{number}.jsonl").write_text(
        triples_to_jsonl(result.triples), encoding="utf-8"
    )
    for batch_index, raw, reason in result.skipped_fragments:
        sys.stderr.write(f"skipped fragment (batch {batch_index}): {raw!r}: {reason}\n")
    if result.not_found_count:
        sys.stderr.write(f'iteration {number}: {result.not_found_count} "not found" line(s)\n')


def cmd_extract(config: PipelineConfig) -> int:
    config.validate(require_corpus=True, require_entity=True, require_backend=True)
    corpus, _ = _load_inputs(config)
    hits = pipeline.filtered_contexts(corpus, config)
    if not hits:
        raise ConfigError(
            f"no contexts found for relation {config.relation!r} with entity {config.entity!r}"
        )
    spec = _prompt_spec(config)
    batches = build_prompts(hits, spec)
    backend = pipeline.make_backend(config)
    outdir = _outdir(config)
    (outdir / "contexts.csv").write_text(pipeline.contexts_to_csv(hits), encoding="utf-8")
    (outdir / "prompts.json").write_text(batches_to_json(batches), encoding="utf-8")
    logger.info(
        "%d contexts in %d prompt batch(es), %d iteration(s)",
        len(hits),
        len(batches),
        config.iterations,
    )
    for iteration in range(1, config.iterations + 1):
        result = pipeline.run_iteration(batches, backend, config)
        _write_iteration_files(outdir, iteration, result)
        logger.info("iteration %d: %d triple(s)", iteration, len(result.triples))
    return EXIT_OK


def _discover_triples_paths(config: PipelineConfig, explicit: Sequence[str] | None) -> list[Path]:
    if explicit:
        return [Path(p) for p in explicit]
    outdir = Path(config.output_dir)
    found = sorted(outdir.glob("triples.iter*.csv"))
    if not found:
        raise ConfigError(
            f"no triples files given and none found under {outdir} (run extract first)"
        )
    return found


def cmd_eval(config: PipelineConfig, gold_path: str | None, policy: str, triples_paths) -> int:
    config.validate(require_corpus=False, require_entity=True)
    if not gold_path:
        raise ConfigError("eval requires --gold")
    paths = _discover_triples_paths(config, triples_paths)
    iteration_triples = [read_triples_csv(path) for path in paths]
    gold = load_gold(gold_path)
    report = evaluate_iterations(iteration_triples, gold, policy)
    outdir = _outdir(config)
    place_frequency, context_count = _report_context(config)
    (outdir / "report.json").write_text(
        report_to_json(report, config.entity, place_frequency, context_count), encoding="utf-8"
    )
    table = render_report_table(
        report, config.entity, place_frequency, context_count, relation=config.relation
    )
    (outdir / "report.txt").write_text(table, encoding="utf-8")
    figures.save_precision_figure(report, outdir / "precision.png", config.entity)
    sys.stdout.write(table)
    return EXIT_OK


def _report_context(config: PipelineConfig) -> tuple[int | None, int | None]:
    """Pick up frequency/context-count context from earlier command outputs."""
    outdir = Path(config.output_dir)
    place_frequency = None
    context_count = None
    freq_path = outdir / "frequencies.csv"
    if freq_path.exists():
        target = config.entity.casefold()
        for line in freq_path.read_text(encoding="utf-8").splitlines()[1:]:
            place, _, count = line.rpartition(",")
            if place.strip('"').casefold() == target:
                place_frequency = int(count)
                break
    contexts_path = outdir / "contexts.csv"
    if contexts_path.exists():
        context_count = max(0, len(contexts_path.read_text(encoding="utf-8").splitlines()) - 1)
    return place_frequency, context_count


def cmd_graph(config: PipelineConfig, triples_paths) -> int:
    config.validate(require_corpus=False)
    paths = _discover_triples_paths(config, triples_paths)
    triples = [t for path in paths for t in read_triples_csv(path)]
    valid = [t for t in triples if t.validity == VALID]
    logger.info("%d valid of %d triples feed the graph", len(valid), len(triples))
    built = graphmod.build_graph(valid)
    outdir = _outdir(config)
    for fmt, filename in (("gexf", "graph.gexf"), ("dot", "graph.dot"), ("jsonl", "graph.jsonl")):
        (outdir / filename).write_bytes(graphmod.export(built, fmt))
    figures.save_graph_figure(built, outdir / "network.png")
    sys.stdout.write(
        f"{len(built.nodes)} nodes, {len(built.edges)} edges, "
        f"total weight {graphmod.total_weight(built)}\n"
    )
    return EXIT_OK


def cmd_pipeline(config: PipelineConfig, gold_path: str | None, policy: str) -> int:
    config.validate(
        require_corpus=True, require_entity=True, require_places=True, require_backend=True
    )
    corpus, gazetteer = _load_inputs(config)
    outdir = _outdir(config)

    # corpus statistics
    stats = corpus_stats(corpus, gazetteer, [config.relation])
    (outdir / "stats.json").write_text(
        json.dumps(
            {
                "file_count": stats.file_count,
                "word_count": stats.word_count,
                "unique_word_forms": stats.unique_word_forms,
                "named_place_occurrences": stats.named_place_occurrences,
                "geographic_noun_occurrences": stats.geographic_noun_occurrences,
                "relation_term_occurrences": dict(stats.relation_term_occurrences),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    (outdir / "stats.txt").write_text(render_stats_table(stats), encoding="utf-8")

    # place frequencies
    frequencies = place_frequencies(corpus, gazetteer)
    freq_lines = ["place,count"] + [
        f"{json.dumps(place) if ',' in place or chr(34) in place else place},{count}"
        for place, count in frequencies
    ]
    (outdir / "frequencies.csv").write_text("\n".join(freq_lines) + "\n", encoding="utf-8")
    figures.save_frequency_figure(frequencies, outdir / "frequencies.png")

    # contexts and prompts
    all_hits = kwic_search(corpus, config.relation, config.window)
    (outdir / "hits.jsonl").write_text(hits_to_jsonl(all_hits), encoding="utf-8")
    hits = filter_by_cooccurrence(all_hits, config.entity)
    if not hits:
        raise ConfigError(
            f"no contexts found for relation {config.relation!r} with entity {config.entity!r}"
        )
    (outdir / "contexts.csv").write_text(pipeline.contexts_to_csv(hits), encoding="utf-8")
    spec = _prompt_spec(config)
    batches = build_prompts(hits, spec)
    (outdir / "prompts.json").write_text(batches_to_json(batches), encoding="utf-8")
    logger.info("%d contexts in %d prompt batch(es)", len(hits), len(batches))

    # extraction iterations
    backend = pipeline.make_backend(config)
    results = []
    for iteration in range(1, config.iterations + 1):
        result = pipeline.run_iteration(batches, backend, config)
        _write_iteration_files(outdir, iteration, result)
        results.append(result)

    # evaluation (optional)
    if gold_path:
        gold = load_gold(gold_path)
        report = evaluate_iterations([r.triples for r in results], gold, policy)
        place_frequency = next(
            (c for place, c in frequencies if place.casefold() == config.entity.casefold()),
            None,
        )
        (outdir / "report.json").write_text(
            report_to_json(report, config.entity, place_frequency, len(hits)), encoding="utf-8"
        )
        (outdir / "report.txt").write_text(
            render_report_table(
                report, config.entity, place_frequency, len(hits), relation=config.relation
            ),
            encoding="utf-8",
        )
        figures.save_precision_figure(report, outdir / "precision.png", config.entity)

    # graph over all iterations' valid triples
    valid = [t for r in results for t in r.triples if t.validity == VALID]
    built = graphmod.build_graph(valid)
    for fmt, filename in (("gexf", "graph.gexf"), ("dot", "graph.dot"), ("jsonl", "graph.jsonl")):
        (outdir / filename).write_bytes(graphmod.export(built, fmt))
    figures.save_graph_figure(built, outdir / "network.png")

    # provenance manifest
    cassette_hash = None
    if config.cassette_path and Path(config.cassette_path).exists():
        cassette_hash = pipeline.sha256_bytes(Path(config.cassette_path).read_bytes())
    manifest = {
        "config_hash": pipeline.config_hash(config),
        "corpus_hash": pipeline.corpus_hash(corpus),
        "cassette_hash": cassette_hash,
        "relation": config.relation,
        "entity": config.entity,
        "iterations": config.iterations,
        "context_count": len(hits),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(f"pipeline complete: {outdir}\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _build_config(args)
        if args.command == "stats":
            return cmd_stats(config)
        if args.command == "kwic":
            return cmd_kwic(config, filtered=args.filtered)
        if args.command == "freq":
            return cmd_freq(config)
        if args.command == "extract":
            return cmd_extract(config)
        if args.command == "eval":
            return cmd_eval(config, args.gold, args.policy, args.triples)
        if args.command == "graph":
            return cmd_graph(config, args.triples)
        if args.command == "pipeline":
            return cmd_pipeline(config, args.gold, args.policy)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, CorpusError, ConcordanceError, PromptError, TripleFormatError, GraphError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except CompletionError as exc:
        logger.error("backend failure: %s", exc)
        return EXIT_BACKEND
    except (GoldFormatError, EvaluationError) as exc:
        logger.error("evaluation error: %s", exc)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
