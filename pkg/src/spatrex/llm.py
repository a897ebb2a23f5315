"""Chat-completion client with http, replay and scripted backends.

This module is the pipeline's only network boundary.  The ``http`` backend
speaks the generic OpenAI-compatible chat-completions wire format (JSON POST
with ``model``, ``messages``, ``temperature``, ``max_tokens``) against any
conformant endpoint, with exponential-backoff retries on 429/5xx.

Determinism elsewhere comes from cassettes: a cassette is a JSON Lines file of
``{"fingerprint": ..., "response": ...}`` records keyed by a hash of the full
request (model, temperature, every message), so editing a prompt invalidates
stale recordings.  The ``replay`` backend serves byte-identical stored
responses and never touches the network; the ``scripted`` backend returns
caller-supplied canned content for tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import requests

logger = logging.getLogger(__name__)

FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_FILTERED = "filtered"
FINISH_ERROR = "error"

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_BACKOFF_BASE = 1.0
DEFAULT_BACKOFF_FACTOR = 2.0
DEFAULT_TIMEOUT = 60.0
DEFAULT_MAX_OUTPUT_TOKENS = 1024


class CompletionError(Exception):
    """Base class for everything that can go wrong talking to a model."""


class MissingCredentialsError(CompletionError):
    pass


class CassetteMissError(CompletionError):
    pass


class HttpStatusError(CompletionError):
    def __init__(self, status: int, detail: str):
        super().__init__(f"HTTP {status}: {detail}")
        self.status = status


class MalformedResponseError(CompletionError):
    pass


class TransportError(CompletionError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS


def user_request(
    model: str,
    content: str,
    temperature: float = 0.0,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
) -> CompletionRequest:
    """A request carrying one user message, the shape every prompt batch uses."""
    return CompletionRequest(
        model=model,
        messages=(Message(role="user", content=content),),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
    )


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    output_tokens: int


@dataclass(frozen=True)
class CompletionResponse:
    content: str
    finish_reason: str = FINISH_STOP
    usage: Usage | None = None


def fingerprint(request: CompletionRequest) -> str:
    """Stable hash of model, temperature and the full message contents."""
    payload = json.dumps(
        {
            "model": request.model,
            "temperature": request.temperature,
            "messages": [[m.role, m.content] for m in request.messages],
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _response_to_dict(response: CompletionResponse) -> dict:
    record: dict = {"content": response.content, "finish_reason": response.finish_reason}
    if response.usage is not None:
        record["usage"] = {
            "prompt_tokens": response.usage.prompt_tokens,
            "output_tokens": response.usage.output_tokens,
        }
    return record


def _response_from_dict(record: dict) -> CompletionResponse:
    usage = None
    if record.get("usage") is not None:
        usage = Usage(
            prompt_tokens=int(record["usage"]["prompt_tokens"]),
            output_tokens=int(record["usage"]["output_tokens"]),
        )
    return CompletionResponse(
        content=record["content"],
        finish_reason=record.get("finish_reason", FINISH_STOP),
        usage=usage,
    )


class Cassette:
    """An ordered fingerprint -> response store with JSON Lines persistence."""

    def __init__(self, entries: dict[str, CompletionResponse] | None = None):
        self._entries: dict[str, CompletionResponse] = dict(entries or {})
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> CompletionResponse | None:
        return self._entries.get(key)

    def put(self, key: str, response: CompletionResponse) -> None:
        with self._lock:
            self._entries[key] = response

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        entries: dict[str, CompletionResponse] = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = record["fingerprint"]
                response = _response_from_dict(record["response"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CompletionError(f"{path}:{lineno}: bad cassette record: {exc}") from exc
            if key in entries:
                raise CompletionError(f"{path}:{lineno}: duplicate fingerprint {key}")
            entries[key] = response
        return cls(entries)

    def save(self, path: str | Path) -> None:
        with self._lock:
            lines = [
                json.dumps(
                    {"fingerprint": key, "response": _response_to_dict(response)},
                    ensure_ascii=False,
                )
                for key, response in self._entries.items()
            ]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


_record_lock = threading.Lock()


def record(
    request: CompletionRequest,
    live_response: CompletionResponse,
    cassette_path: str | Path,
) -> Cassette:
    """Append-or-replace the response for this request in the cassette file.

    Recording the same fingerprint twice keeps the cassette length unchanged
    and updates the stored response.  File writes are serialized.
    """
    with _record_lock:
        path = Path(cassette_path)
        cassette = Cassette.load(path) if path.exists() else Cassette()
        cassette.put(fingerprint(request), live_response)
        cassette.save(path)
    return cassette


class ReplayBackend:
    """Serve stored responses byte-identically; every miss is an error."""

    order_dependent = False

    def __init__(self, cassette: Cassette):
        self._cassette = cassette

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        if not Path(path).exists():
            raise CassetteMissError(f"cassette file not found: {path}")
        return cls(Cassette.load(path))

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = fingerprint(request)
        response = self._cassette.get(key)
        if response is None:
            raise CassetteMissError(f"cassette has no recording for fingerprint {key}")
        return response


class ScriptedBackend:
    """Test-supplied canned contents, consumed in request order (cycling)."""

    order_dependent = True

    def __init__(self, contents: Sequence[str]):
        if not contents:
            raise CompletionError("scripted backend needs at least one canned response")
        self._contents = list(contents)
        self._calls = 0
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            content = self._contents[self._calls % len(self._contents)]
            self._calls += 1
        return CompletionResponse(content=content, finish_reason=FINISH_STOP)


class HttpBackend:
    """POST to an OpenAI-compatible chat-completions route with retries."""

    order_dependent = False

    def __init__(
        self,
        endpoint: str,
        api_key: str | None,
        timeout: float = DEFAULT_TIMEOUT,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        backoff_factor: float = DEFAULT_BACKOFF_FACTOR,
        sleep: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ):
        if not endpoint:
            raise MissingCredentialsError("http backend requires an endpoint URL")
        if not api_key:
            raise MissingCredentialsError("http backend requires an API key")
        self._endpoint = endpoint
        self._api_key = api_key
        self._timeout = timeout
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._backoff_factor = backoff_factor
        self._sleep = sleep
        self._session = session or requests.Session()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        body = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {
            "Authorization": f"Bearer {self._api_key}",
            "Content-Type": "application/json",
        }
        delay = self._backoff_base
        for attempt in range(1, self._max_attempts + 1):
            try:
                http_response = self._session.post(
                    self._endpoint, json=body, headers=headers, timeout=self._timeout
                )
            except requests.RequestException as exc:
                raise TransportError(f"request to {self._endpoint} failed: {exc}") from exc
            if http_response.status_code in _RETRYABLE_STATUSES:
                if attempt == self._max_attempts:
                    raise HttpStatusError(
                        http_response.status_code,
                        f"still failing after {attempt} attempts",
                    )
                logger.warning(
                    "retryable HTTP %d from %s (attempt %d/%d), backing off %.1fs",
                    http_response.status_code,
                    self._endpoint,
                    attempt,
                    self._max_attempts,
                    delay,
                )
                self._sleep(delay)
                delay *= self._backoff_factor
                continue
            if http_response.status_code != 200:
                raise HttpStatusError(http_response.status_code, http_response.text[:500])
            return _parse_completion_body(http_response.text)
        raise AssertionError("unreachable")  # loop always returns or raises


def _parse_completion_body(text: str) -> CompletionResponse:
    try:
        data = json.loads(text)
        choice = data["choices"][0]
        content = choice["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(f"unparseable completion body: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponseError("completion content is not a string")
    finish = {
        "stop": FINISH_STOP,
        "length": FINISH_LENGTH,
        "content_filter": FINISH_FILTERED,
    }.get(choice.get("finish_reason"), FINISH_STOP)
    usage = None
    raw_usage = data.get("usage")
    if isinstance(raw_usage, dict) and "prompt_tokens" in raw_usage:
        usage = Usage(
            prompt_tokens=int(raw_usage.get("prompt_tokens", 0)),
            output_tokens=int(raw_usage.get("completion_tokens", 0)),
        )
    return CompletionResponse(content=content, finish_reason=finish, usage=usage)


def complete(request: CompletionRequest, backend) -> CompletionResponse:
    """Run one completion against whichever backend the caller selected."""
    response = backend.complete(request)
    if response.finish_reason == FINISH_LENGTH:
        logger.warning(
            "completion truncated at max output tokens (model=%s); parsing partial content",
            request.model,
        )
    return response
