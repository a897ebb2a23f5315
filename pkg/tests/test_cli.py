"""Command-line interface: commands, files written, exit codes."""

from __future__ import annotations

import csv
import json
import subprocess

import pytest

from spatrex import cli

from conftest import (
    CORPUS_DIR,
    GEO_NOUNS_PATH,
    GOLD_PATH,
    PLACES_PATH,
    SCRIPTED_NOT_FOUND_PATH,
    gold_table,
    keswick_batches,
    parse_dot,
    validate_gexf_structure,
    write_cassette,
    write_scripted,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def base_args(outdir, *extra: str) -> list[str]:
    return [
        "--corpus-root",
        str(CORPUS_DIR),
        "--place-names",
        str(PLACES_PATH),
        "--geographic-nouns",
        str(GEO_NOUNS_PATH),
        "--output",
        str(outdir),
        *extra,
    ]


@pytest.fixture()
def scripted_setup(keswick_hits, tmp_path):
    """Batches at the test budget plus a matching scripted-responses file."""
    batches = keswick_batches(keswick_hits, max_prompt_tokens=1200)
    scripted = write_scripted(tmp_path / "responses.json", batches, gold_table())
    return batches, scripted


def run_extract(outdir, scripted, *extra: str) -> int:
    return cli.main(
        [
            "extract",
            *base_args(
                outdir,
                "--entity",
                "keswick",
                "--max-prompt-tokens",
                "1200",
                "--backend",
                "scripted",
                "--scripted-responses",
                str(scripted),
            ),
            *extra,
        ]
    )


class TestHelp:
    def test_console_script_help(self):
        done = subprocess.run(
            ["spatrex", "--help"], capture_output=True, text=True, timeout=30
        )
        assert done.returncode == 0
        assert "stats" in done.stdout and "pipeline" in done.stdout

    def test_subcommand_help(self):
        done = subprocess.run(
            ["spatrex", "extract", "--help"], capture_output=True, text=True, timeout=30
        )
        assert done.returncode == 0
        assert "--backend" in done.stdout


class TestStats:
    def test_writes_json_and_table(self, tmp_path, capsys):
        outdir = tmp_path / "out"
        assert cli.main(["stats", *base_args(outdir)]) == 0
        payload = json.loads((outdir / "stats.json").read_text(encoding="utf-8"))
        assert payload["file_count"] == 5
        assert payload["relation_term_occurrences"]["near"] == 98
        table = (outdir / "stats.txt").read_text(encoding="utf-8")
        assert "Text Files" in table
        assert table in capsys.readouterr().out


class TestKwic:
    def test_unfiltered_hits(self, tmp_path):
        outdir = tmp_path / "out"
        assert cli.main(["kwic", *base_args(outdir)]) == 0
        lines = (outdir / "hits.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 98

    def test_filtered_hits(self, tmp_path):
        outdir = tmp_path / "out"
        assert cli.main(["kwic", *base_args(outdir, "--entity", "keswick", "--filtered")]) == 0
        lines = (outdir / "hits.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 84

    def test_window_override(self, tmp_path):
        outdir = tmp_path / "out"
        assert cli.main(["kwic", *base_args(outdir, "--window", "5")]) == 0
        for line in (outdir / "hits.jsonl").read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            assert len(record["left"]) <= 5 and len(record["right"]) <= 5

    def test_filtered_requires_entity(self, tmp_path):
        assert cli.main(["kwic", *base_args(tmp_path / "out", "--filtered")]) == 1


class TestFreq:
    def test_csv_and_figure(self, tmp_path):
        outdir = tmp_path / "out"
        assert cli.main(["freq", *base_args(outdir)]) == 0
        rows = (outdir / "frequencies.csv").read_text(encoding="utf-8").splitlines()
        assert rows[0] == "place,count"
        assert rows[1] == "Keswick,84"
        png = (outdir / "frequencies.png").read_bytes()
        assert png.startswith(PNG_MAGIC)


class TestExtract:
    def test_scripted_run_produces_triples(self, tmp_path, scripted_setup):
        batches, scripted = scripted_setup
        outdir = tmp_path / "out"
        assert run_extract(outdir, scripted) == 0

        contexts = list(
            csv.reader((outdir / "contexts.csv").read_text(encoding="utf-8").splitlines())
        )
        assert contexts[0] == ["context_id", "doc_id", "match_index", "passage"]
        assert len(contexts) == 85

        prompts = json.loads((outdir / "prompts.json").read_text(encoding="utf-8"))
        assert len(prompts) == len(batches)

        for iteration in (1, 2):
            responses = (outdir / f"responses.iter{iteration}.jsonl").read_text(
                encoding="utf-8"
            ).splitlines()
            assert len(responses) == len(batches)
            rows = list(
                csv.reader(
                    (outdir / f"triples.iter{iteration}.csv")
                    .read_text(encoding="utf-8")
                    .splitlines()
                )
            )
            assert len(rows) == 85  # header + one triple per context
            assert {row[5] for row in rows[1:]} == {"valid"}

        first = rows[1]
        assert first[:4] == ["Castlehead", "near", "Keswick", "1"]

    def test_not_found_everywhere_means_no_triples(self, tmp_path, capsys):
        outdir = tmp_path / "out"
        assert run_extract(outdir, SCRIPTED_NOT_FOUND_PATH) == 0
        rows = (outdir / "triples.iter1.csv").read_text(encoding="utf-8").splitlines()
        assert rows == ["subject,relation,object,passage_number,batch_index,validity"]
        assert "not found" in capsys.readouterr().err

    def test_iterations_flag(self, tmp_path, scripted_setup):
        _, scripted = scripted_setup
        outdir = tmp_path / "out"
        assert run_extract(outdir, scripted, "--iterations", "1") == 0
        assert (outdir / "triples.iter1.csv").exists()
        assert not (outdir / "triples.iter2.csv").exists()


class TestEval:
    def test_report_after_extract(self, tmp_path, scripted_setup):
        _, scripted = scripted_setup
        outdir = tmp_path / "out"
        assert cli.main(["freq", *base_args(outdir)]) == 0
        assert run_extract(outdir, scripted) == 0
        assert (
            cli.main(
                [
                    "eval",
                    *base_args(outdir, "--entity", "keswick", "--gold", str(GOLD_PATH)),
                ]
            )
            == 0
        )
        payload = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
        assert payload["place_frequency"] == 84
        assert payload["context_count"] == 84
        for iteration in payload["iterations"]:
            assert iteration["produced"] == 84
            assert iteration["correct"] == 53
            assert iteration["precision"] == [53, 84]
        assert payload["average_precision"] == [53, 84]
        assert (outdir / "precision.png").read_bytes().startswith(PNG_MAGIC)
        table = (outdir / "report.txt").read_text(encoding="utf-8")
        assert "keswick" in table

    def test_gold_flag_required(self, tmp_path):
        assert cli.main(["eval", *base_args(tmp_path / "out", "--entity", "keswick")]) == 1


class TestGraphCommand:
    def test_exports_and_figure(self, tmp_path, scripted_setup):
        _, scripted = scripted_setup
        outdir = tmp_path / "out"
        assert run_extract(outdir, scripted) == 0
        assert cli.main(["graph", *base_args(outdir)]) == 0

        validate_gexf_structure((outdir / "graph.gexf").read_bytes())
        nodes, edges = parse_dot((outdir / "graph.dot").read_bytes())
        assert "Keswick" in nodes
        # two identical iterations double every edge weight
        assert sum(penwidth - 1 for _, _, _, penwidth in edges) == 84 * 2
        assert ("Castlehead", "Keswick", "near", 3) in edges
        assert (outdir / "network.png").read_bytes().startswith(PNG_MAGIC)

        jsonl = (outdir / "graph.jsonl").read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in jsonl]
        assert sum(r["weight"] for r in records) == 84 * 2


class TestPipeline:
    def test_end_to_end_replay_with_ini(self, tmp_path, keswick_hits):
        batches = keswick_batches(keswick_hits, max_prompt_tokens=1200)
        cassette = write_cassette(tmp_path / "keswick.jsonl", batches, gold_table())
        outdir = tmp_path / "out"
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[corpus]\n"
            f"root = {CORPUS_DIR}\n"
            f"place_names = {PLACES_PATH}\n"
            f"geographic_nouns = {GEO_NOUNS_PATH}\n"
            "[extraction]\n"
            "entity = keswick\n"
            "max_prompt_tokens = 1200\n"
            "[llm]\n"
            "backend = replay\n"
            f"cassette = {cassette}\n"
            "[output]\n"
            f"dir = {outdir}\n",
            encoding="utf-8",
        )
        assert cli.main(["pipeline", "--config", str(ini), "--gold", str(GOLD_PATH)]) == 0

        for name in (
            "stats.json",
            "stats.txt",
            "frequencies.csv",
            "frequencies.png",
            "hits.jsonl",
            "contexts.csv",
            "prompts.json",
            "responses.iter1.jsonl",
            "responses.iter2.jsonl",
            "triples.iter1.csv",
            "triples.iter2.csv",
            "report.json",
            "report.txt",
            "precision.png",
            "graph.gexf",
            "graph.dot",
            "graph.jsonl",
            "network.png",
            "manifest.json",
        ):
            assert (outdir / name).exists(), name

        manifest = json.loads((outdir / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["context_count"] == 84
        assert manifest["entity"] == "keswick"
        assert len(manifest["config_hash"]) == 64
        assert len(manifest["corpus_hash"]) == 64
        assert manifest["cassette_hash"] is not None

        report = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
        assert report["average_precision"] == [53, 84]


class TestExitCodes:
    def test_config_error_is_one(self, tmp_path):
        assert cli.main(["stats", "--corpus-root", str(tmp_path / "absent")]) == 1

    def test_missing_entity_is_one(self, tmp_path):
        args = base_args(
            tmp_path / "out", "--backend", "scripted", "--scripted-responses", "x.json"
        )
        assert cli.main(["extract", *args]) == 1

    def test_backend_failure_is_two(self, tmp_path):
        empty_cassette = tmp_path / "empty.jsonl"
        empty_cassette.write_text("", encoding="utf-8")
        args = base_args(
            tmp_path / "out",
            "--entity",
            "keswick",
            "--backend",
            "replay",
            "--cassette",
            str(empty_cassette),
        )
        assert cli.main(["extract", *args]) == 2

    def test_eval_error_is_three(self, tmp_path, scripted_setup):
        _, scripted = scripted_setup
        outdir = tmp_path / "out"
        assert run_extract(outdir, scripted) == 0
        bad_gold = tmp_path / "bad_gold.csv"
        bad_gold.write_text("1,true,A\n", encoding="utf-8")
        code = cli.main(
            ["eval", *base_args(outdir, "--entity", "keswick", "--gold", str(bad_gold))]
        )
        assert code == 3
