"""Pipeline configuration: INI file, CLI overrides, env for secrets only.

The config file is flat key-value INI with three sections::

    [corpus]
    root = corpus/
    manifest =                  ; optional id<TAB>filename manifest
    place_names = places.txt
    geographic_nouns = nouns.txt

    [extraction]
    relation = near
    entity = Keswick
    window = 15
    max_prompt_tokens = 4096
    iterations = 2
    template =                  ; optional instruction template file
    not_found_clause = false

    [llm]
    backend = replay            ; http | replay | scripted
    endpoint =
    model = gpt-4
    api_key_env = SPATREX_API_KEY
    cassette = cassette.jsonl
    scripted_responses =        ; JSON list of canned contents, scripted only
    temperature = 0
    max_output_tokens = 1024
    timeout = 60
    parallelism = 2
    record = false

    [output]
    dir = out/

Only the API key comes from the environment (the variable named by
``api_key_env``); everything else lives in the file or on the command line.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

BACKENDS = ("http", "replay", "scripted")


class ConfigError(Exception):
    """Raised for unusable configuration before any work starts."""


@dataclass(frozen=True)
class PipelineConfig:
    corpus_root: str
    entity: str
    place_names_path: str | None = None
    geographic_nouns_path: str | None = None
    manifest_path: str | None = None
    relation: str = "near"
    window: int = 15
    max_prompt_tokens: int = 4096
    iterations: int = 2
    template_path: str | None = None
    not_found_clause: bool = False
    backend: str = "replay"
    endpoint: str | None = None
    model: str = "gpt-4"
    api_key_env: str = "SPATREX_API_KEY"
    cassette_path: str | None = None
    scripted_responses_path: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    timeout: float = 60.0
    parallelism: int = 2
    record: bool = False
    output_dir: str = "out"

    def validate(
        self,
        *,
        require_corpus: bool = True,
        require_entity: bool = False,
        require_places: bool = False,
        require_backend: bool = False,
    ) -> None:
        """Check the fields a command actually needs; raises ConfigError."""
        if not self.relation.strip():
            raise ConfigError("relation term is required")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.max_prompt_tokens < 1:
            raise ConfigError("max_prompt_tokens must be >= 1")
        if require_corpus and not self.corpus_root:
            raise ConfigError("corpus root is required")
        if require_entity and not self.entity:
            raise ConfigError("target entity is required")
        if require_places and not self.place_names_path:
            raise ConfigError("a place-names gazetteer file is required")
        if require_backend:
            if self.backend not in BACKENDS:
                raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
            if self.backend == "http":
                if not self.endpoint:
                    raise ConfigError("backend=http requires an endpoint URL")
                if not os.environ.get(self.api_key_env):
                    raise ConfigError(f"backend=http requires an API key in ${self.api_key_env}")
            if self.backend == "replay" and not self.cassette_path:
                raise ConfigError("backend=replay requires a cassette path")
            if self.backend == "scripted" and not self.scripted_responses_path:
                raise ConfigError("backend=scripted requires a scripted responses file")
            if self.record and self.backend != "http":
                raise ConfigError("record=true only makes sense with backend=http")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


_BOOL_TRUE = frozenset({"1", "true", "yes", "on"})
_BOOL_FALSE = frozenset({"0", "false", "no", "off"})


def _parse_bool(raw: str, key: str) -> bool:
    value = raw.strip().casefold()
    if value in _BOOL_TRUE:
        return True
    if value in _BOOL_FALSE:
        return False
    raise ConfigError(f"{key} must be a boolean, got {raw!r}")


def _get(parser: configparser.ConfigParser, section: str, key: str) -> str | None:
    if parser.has_option(section, key):
        value = parser.get(section, key).strip()
        return value or None
    return None


def load_config(path: str | Path) -> PipelineConfig:
    """Read a config file into a :class:`PipelineConfig` (not yet validated)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(str(path), encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")

    def text(section: str, key: str, default: str | None = None) -> str | None:
        value = _get(parser, section, key)
        return value if value is not None else default

    def integer(section: str, key: str, default: int) -> int:
        value = _get(parser, section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}") from None

    def number(section: str, key: str, default: float) -> float:
        value = _get(parser, section, key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}") from None

    def boolean(section: str, key: str, default: bool) -> bool:
        value = _get(parser, section, key)
        if value is None:
            return default
        return _parse_bool(value, f"{section}.{key}")

    return PipelineConfig(
        corpus_root=text("corpus", "root") or "",
        manifest_path=text("corpus", "manifest"),
        place_names_path=text("corpus", "place_names"),
        geographic_nouns_path=text("corpus", "geographic_nouns"),
        relation=text("extraction", "relation", "near") or "near",
        entity=text("extraction", "entity") or "",
        window=integer("extraction", "window", 15),
        max_prompt_tokens=integer("extraction", "max_prompt_tokens", 4096),
        iterations=integer("extraction", "iterations", 2),
        template_path=text("extraction", "template"),
        not_found_clause=boolean("extraction", "not_found_clause", False),
        backend=text("llm", "backend", "replay") or "replay",
        endpoint=text("llm", "endpoint"),
        model=text("llm", "model", "gpt-4") or "gpt-4",
        api_key_env=text("llm", "api_key_env", "SPATREX_API_KEY") or "SPATREX_API_KEY",
        cassette_path=text("llm", "cassette"),
        scripted_responses_path=text("llm", "scripted_responses"),
        temperature=number("llm", "temperature", 0.0),
        max_output_tokens=integer("llm", "max_output_tokens", 1024),
        timeout=number("llm", "timeout", 60.0),
        parallelism=integer("llm", "parallelism", 2),
        record=boolean("llm", "record", False),
        output_dir=text("output", "dir", "out") or "out",
    )


def apply_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    """Overlay non-None CLI values onto a config."""
    known = {f.name for f in fields(PipelineConfig)}
    cleaned = {}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
        if value is not None:
            cleaned[key] = value
    return replace(config, **cleaned)
