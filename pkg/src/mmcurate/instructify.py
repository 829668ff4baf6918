"""Convert filtered records into instruction/response training examples.

Templates are rendered with str.replace on the single {question} slot, not
str.format, so templates may contain literal braces (JSON snippets, Arabic
quotes) without escaping.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import RecordValidationError
from .records import InstructionRecord, VqaRecord

QUESTION_SLOT = "{question}"

# Abjad order, the conventional Arabic answer-sheet lettering.
ARABIC_CHOICE_LABELS = ("أ", "ب", "ج", "د", "ه", "و", "ز", "ح")

CHOICE_SEPARATOR = ". "


@dataclass(frozen=True)
class TemplateSet:
    """A named pool of instruction templates, one {question} slot each.

    Template choice is a pure function of (rng_seed, record id), so re-runs
    over the same corpus pick the same phrasing for every record.
    """

    templates: tuple[str, ...]
    name: str = "default"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.templates:
            raise ValueError("TemplateSet requires at least one template")
        for i, template in enumerate(self.templates):
            count = template.count(QUESTION_SLOT)
            if count != 1:
                raise ValueError(
                    f"template {i} has {count} {QUESTION_SLOT} slots, expected exactly 1"
                )

    @classmethod
    def from_file(cls, path: str | Path, rng_seed: int = 0) -> "TemplateSet":
        """Load templates from plain text, one per line; blank lines are skipped."""
        path = Path(path)
        lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
        return cls(tuple(line for line in lines if line), name=path.stem, rng_seed=rng_seed)

    @classmethod
    def default_arabic(cls, rng_seed: int = 0) -> "TemplateSet":
        ref = resources.files("mmcurate") / "templates" / "vqa_ar.txt"
        lines = [line.strip() for line in ref.read_text(encoding="utf-8").splitlines()]
        return cls(tuple(line for line in lines if line), name="vqa_ar", rng_seed=rng_seed)

    def choose(self, record_id: str) -> int:
        """Deterministic template index for a record, uniform across the pool."""
        digest = hashlib.sha256(f"{self.rng_seed}:{record_id}".encode("utf-8")).hexdigest()
        return int(digest, 16) % len(self.templates)

    def render(self, index: int, question: str) -> str:
        return self.templates[index].replace(QUESTION_SLOT, question)


def vqa_to_instruction(record: VqaRecord, templates: TemplateSet) -> InstructionRecord:
    """One open-generation example from a translated VQA record.

    The response is the first gold answer; gold lists carry no ranking, so
    position zero keeps the choice reproducible without pretending to rank.
    """
    if record.question_tgt is None or record.answers_tgt is None:
        raise RecordValidationError(
            f"record {record.id}: cannot instructify before translation",
            record_id=record.id,
        )
    if not record.answers_tgt:
        raise RecordValidationError(
            f"record {record.id}: no gold answers", record_id=record.id
        )
    index = templates.choose(record.id)
    out = InstructionRecord(
        id=record.id,
        image=record.image,
        task_type="vqa",
        instruction=templates.render(index, record.question_tgt),
        response=record.answers_tgt[0],
    )
    out.validate()
    return out


def format_choice(label: str, choice: str) -> str:
    return f"{label}{CHOICE_SEPARATOR}{choice}"


def mcq_to_instruction(
    record_id: str,
    image: str,
    question: str,
    choices: Sequence[str],
    answer_index: int,
    alphabet: Sequence[str] = ARABIC_CHOICE_LABELS,
    directive: str = "",
) -> InstructionRecord:
    """A multiple-choice example with lettered options.

    The response repeats the gold label with its choice text so the training
    target is unambiguous even when two options share a prefix.
    """
    if not 2 <= len(choices) <= len(alphabet):
        raise RecordValidationError(
            f"record {record_id}: need between 2 and {len(alphabet)} choices, "
            f"got {len(choices)}",
            record_id=record_id,
        )
    if not 0 <= answer_index < len(choices):
        raise RecordValidationError(
            f"record {record_id}: answer_index {answer_index} out of range",
            record_id=record_id,
        )
    labels = list(alphabet[: len(choices)])
    lines = [question]
    for label, choice in zip(labels, choices):
        lines.append(format_choice(label, choice))
    if directive:
        lines.append(directive)
    out = InstructionRecord(
        id=record_id,
        image=image,
        task_type="mcq",
        instruction="\n".join(lines),
        response=format_choice(labels[answer_index], choices[answer_index]),
        choices=list(choices),
    )
    out.validate()
    return out


def flatten_conversation(
    turns: Sequence[tuple[str, str]],
    record_id: str,
    image: str,
    task_type: str = "conversation",
) -> list[InstructionRecord]:
    """Split a multi-turn conversation into per-turn training examples.

    ``turns`` alternates (human, assistant) text pairs flattened into one
    list, starting with a human turn. Example k carries the k earlier
    exchanges as structured history so nothing re-renders the transcript.
    """
    if not turns:
        raise RecordValidationError(f"record {record_id}: empty conversation")
    if len(turns) % 2 != 0:
        raise RecordValidationError(
            f"record {record_id}: conversation must end on an assistant turn"
        )
    for i, (role, text) in enumerate(turns):
        expected = "human" if i % 2 == 0 else "assistant"
        if role != expected:
            raise RecordValidationError(
                f"record {record_id}: turn {i} has role {role!r}, expected {expected!r}"
            )
        if not text:
            raise RecordValidationError(f"record {record_id}: turn {i} is empty")

    out: list[InstructionRecord] = []
    history: list[tuple[str, str]] = []
    for k in range(len(turns) // 2):
        instruction = turns[2 * k][1]
        response = turns[2 * k + 1][1]
        rec = InstructionRecord(
            id=f"{record_id}#t{k}",
            image=image,
            task_type=task_type,
            instruction=instruction,
            response=response,
            history=list(history) if history else None,
        )
        rec.validate()
        out.append(rec)
        history.append((instruction, response))
    return out
