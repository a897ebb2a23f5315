"""Zero-shot extraction prompt assembly with budget-driven batching.

A prompt asks the model to extract one spatial relation for one target entity
from a list of numbered passages and pins the output shape to
``<subject, spatial relation, object>`` so responses stay machine-parseable.
Passages are the rendered keyword-in-context windows; when they would blow the
token budget the list is split greedily into several self-contained prompts,
each renumbering its passages from (1).  Global passage numbers are kept in
``PromptBatch.passage_refs`` for provenance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .concordance import KwicHit

OUTPUT_FORMAT_CLAUSE = "The output should be in the form <subject, spatial relation, object>."

NOT_FOUND_CLAUSE = 'respond "not found" if no confident relation is present'

DEFAULT_TEMPLATE = (
    "From the given passages numbered in brackets (), extract spatial relation "
    '"{relation}" only if the entity \'{entity}\' is involved in a relation with '
    "other entities. " + OUTPUT_FORMAT_CLAUSE + "{passages}"
)

_PLACEHOLDERS = ("{relation}", "{entity}", "{passages}")


class PromptError(Exception):
    """Raised for invalid prompt specs and unbatchable passages."""


@dataclass(frozen=True)
class PromptSpec:
    """Everything needed to render extraction prompts for one entity."""

    relation: str
    entity: str
    instruction_template: str = DEFAULT_TEMPLATE
    include_not_found_clause: bool = False
    max_prompt_tokens: int = 4096
    bytes_per_token: float = 4.0


@dataclass(frozen=True)
class PromptBatch:
    """One fully rendered prompt covering a slice of the passage list."""

    batch_index: int
    passage_refs: tuple[tuple[int, KwicHit], ...]
    content: str


def estimate_tokens(text: str, bytes_per_token: float = 4.0) -> int:
    """Deterministic token-count proxy: ceil(UTF-8 byte length / scale).

    A coarse overestimate-tolerant heuristic; the scale factor is configurable
    for providers whose tokenizers run denser or sparser than 4 bytes/token.
    """
    if bytes_per_token <= 0:
        raise PromptError("bytes_per_token must be positive")
    byte_length = len(text.encode("utf-8"))
    return math.ceil(byte_length / bytes_per_token)


def _instruction(spec: PromptSpec) -> str:
    """The template with relation/entity filled in; {passages} still open."""
    for placeholder in _PLACEHOLDERS:
        if spec.instruction_template.count(placeholder) != 1:
            raise PromptError(
                f"instruction template must contain {placeholder} exactly once"
            )
    text = spec.instruction_template.replace("{relation}", spec.relation)
    text = text.replace("{entity}", spec.entity)
    if spec.include_not_found_clause:
        text = text.replace("{passages}", " " + NOT_FOUND_CLAUSE + ".{passages}")
    return text


def _render(instruction: str, passages: Sequence[str]) -> str:
    numbered = " ".join(f"({n}){text}" for n, text in enumerate(passages, start=1))
    return instruction.replace("{passages}", numbered)


def build_prompts(hits: Sequence[KwicHit], spec: PromptSpec) -> list[PromptBatch]:
    """Pack passages greedily into prompts under ``spec.max_prompt_tokens``.

    The result is a partition of ``hits`` in input order; passage numbering in
    each prompt restarts at (1) while ``passage_refs`` keeps 1-based global
    numbers.  A single passage that cannot fit even alone is an error.
    """
    if not hits:
        raise PromptError("no passages to prompt with")
    instruction = _instruction(spec)
    overhead = estimate_tokens(_render(instruction, []), spec.bytes_per_token)
    if spec.max_prompt_tokens <= overhead:
        raise PromptError(
            f"max_prompt_tokens={spec.max_prompt_tokens} does not exceed the "
            f"instruction overhead of {overhead} tokens"
        )

    batches: list[PromptBatch] = []
    current: list[tuple[int, KwicHit]] = []

    def close_batch() -> None:
        content = _render(instruction, [hit.rendered for _, hit in current])
        batches.append(
            PromptBatch(batch_index=len(batches), passage_refs=tuple(current), content=content)
        )
        current.clear()

    for global_number, hit in enumerate(hits, start=1):
        if current:
            tentative = [h.rendered for _, h in current] + [hit.rendered]
            if estimate_tokens(_render(instruction, tentative), spec.bytes_per_token) > spec.max_prompt_tokens:
                close_batch()
        if not current:
            alone = estimate_tokens(_render(instruction, [hit.rendered]), spec.bytes_per_token)
            if alone > spec.max_prompt_tokens:
                raise PromptError(
                    f"passage {global_number} ({hit.doc_id}@{hit.match_index}) "
                    f"exceeds the prompt budget on its own ({alone} > "
                    f"{spec.max_prompt_tokens} tokens)"
                )
        current.append((global_number, hit))
    if current:
        close_batch()
    return batches


def load_template(path: str) -> str:
    """Read an instruction template override from a text file."""
    with open(path, "r", encoding="utf-8") as handle:
        template = handle.read().strip("\n")
    for placeholder in _PLACEHOLDERS:
        if template.count(placeholder) != 1:
            raise PromptError(f"template file {path} must contain {placeholder} exactly once")
    return template


def batches_to_json(batches: Sequence[PromptBatch]) -> str:
    """Audit dump of all batches: indexes, global passage numbers, content."""
    payload = [
        {
            "batch_index": batch.batch_index,
            "passages": [
                {"global_number": number, "doc_id": hit.doc_id, "match_index": hit.match_index}
                for number, hit in batch.passage_refs
            ],
            "content": batch.content,
        }
        for batch in batches
    ]
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
