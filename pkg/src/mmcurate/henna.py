"""Build a country-grounded cultural VQA benchmark from reference articles.

Question/answer pairs are produced by a text model prompted with an article
about one attraction, then validated hard: the model must return exactly the
requested number of pairs or the item fails after a single re-ask.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import GenerationError, RecordValidationError
from .providers import JudgeProvider, map_batches
from .records import register_schema

CANONICAL_COUNTRIES = (
    "Algeria",
    "Egypt",
    "Iraq",
    "Jordan",
    "Morocco",
    "Palestine",
    "Saudi Arabia",
    "Syria",
    "Tunisia",
    "United Arab Emirates",
    "Yemen",
)

CANONICAL_CATEGORIES = (
    "traditional food and cuisine",
    "local customs",
    "historical monuments and sites",
    "common activities and lifestyles",
    "architectural styles and notable buildings",
)

# Published size of the reference benchmark; reported, never enforced.
CANONICAL_TOTAL = 1132

CONTEXT_WORD_LIMIT = 6000

QUESTIONS_PER_IMAGE = 10

MIN_IMAGES_PER_COUNTRY = 10


@dataclass(frozen=True)
class Taxonomy:
    countries: tuple[str, ...] = CANONICAL_COUNTRIES
    categories: tuple[str, ...] = CANONICAL_CATEGORIES

    def __post_init__(self) -> None:
        if not self.countries:
            raise ValueError("taxonomy needs at least one country")
        if len(set(self.countries)) != len(self.countries):
            raise ValueError("duplicate countries in taxonomy")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate categories in taxonomy")

    @property
    def is_canonical(self) -> bool:
        return (
            self.countries == CANONICAL_COUNTRIES
            and self.categories == CANONICAL_CATEGORIES
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Taxonomy":
        """Load {"countries": [...], "categories": [...]} from a JSON file."""
        with Path(path).open("r", encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(
            countries=tuple(str(c) for c in data["countries"]),
            categories=tuple(str(c) for c in data.get("categories", CANONICAL_CATEGORIES)),
        )


@dataclass
class AttractionSource:
    """One attraction: its image, home country, and reference article."""

    name: str
    country: str
    image: str
    wiki_text: str
    wiki_title: str = ""
    category: str | None = None


REVIEW_STATUSES = ("unreviewed", "approved", "rejected")


@dataclass
class BenchmarkItem:
    id: str
    country: str
    attraction: str
    image: str
    question: str
    answer: str
    category: str | None = None
    review_status: str = "unreviewed"

    def validate(self) -> None:
        if not self.id:
            raise RecordValidationError("id must be non-empty")
        for name in ("country", "attraction", "image", "question", "answer"):
            if not getattr(self, name):
                raise RecordValidationError(
                    f"item {self.id}: {name} must be non-empty", record_id=self.id
                )
        if self.review_status not in REVIEW_STATUSES:
            raise RecordValidationError(
                f"item {self.id}: unknown review_status {self.review_status!r}",
                record_id=self.id,
            )


register_schema("benchmark", BenchmarkItem)


TRUNCATION_NOTE = "[article truncated]"


def truncate_context(text: str, word_limit: int = CONTEXT_WORD_LIMIT) -> str:
    """Keep the first ``word_limit`` whitespace-delimited words.

    Articles front-load the defining facts, so truncation keeps the head; a
    trailing note tells the model the cut happened.
    """
    words = text.split()
    if len(words) <= word_limit:
        return text.strip()
    return " ".join(words[:word_limit]) + f" {TRUNCATION_NOTE}"


def build_generation_prompt(
    source: AttractionSource,
    n: int = QUESTIONS_PER_IMAGE,
    word_limit: int = CONTEXT_WORD_LIMIT,
) -> str:
    if n < 1:
        raise ValueError("n must be at least 1")
    context = truncate_context(source.wiki_text, word_limit)
    return (
        f"You are given a reference article about {source.name}, "
        f"a cultural attraction in {source.country}.\n"
        f"Write exactly {n} question and answer pairs in Arabic about this "
        f"attraction, as if a person were looking at a photo of it. Every "
        f"answer must be supported by the article. Number the pairs and use "
        f"this exact format:\n"
        f"1. Q: <question in Arabic>\n"
        f"A: <answer in Arabic>\n\n"
        f"Article:\n{context}\n"
    )


_Q_LINE = re.compile(r"^(?:\d+[\.\)]\s*)?Q\s*:\s*(.*)$")
_A_LINE = re.compile(r"^(?:\d+[\.\)]\s*)?A\s*:\s*(.*)$")


def parse_qa_pairs(text: str) -> list[tuple[str, str]]:
    """Parse numbered Q:/A: lines into ordered (question, answer) pairs.

    Continuation lines attach to whichever side is open. A question without
    an answer, or an answer before any question, is a parse failure.
    """
    pairs: list[tuple[str, str]] = []
    question: str | None = None
    answer: str | None = None

    def close() -> None:
        nonlocal question, answer
        if question is not None:
            if answer is None:
                raise GenerationError(f"question without answer: {question[:80]!r}")
            pairs.append((question.strip(), answer.strip()))
        question = None
        answer = None

    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        q_match = _Q_LINE.match(line)
        a_match = _A_LINE.match(line)
        if q_match:
            close()
            question = q_match.group(1).strip()
        elif a_match:
            if question is None:
                raise GenerationError("answer line before any question")
            if answer is not None:
                raise GenerationError("two answer lines for one question")
            answer = a_match.group(1).strip()
        elif answer is not None:
            answer = f"{answer} {line}"
        elif question is not None:
            question = f"{question} {line}"
        # Preamble before the first Q: line is ignored.
    close()
    for q, a in pairs:
        if not q or not a:
            raise GenerationError("empty question or answer text")
    return pairs


def generate_items(
    sources: Sequence[AttractionSource],
    provider: JudgeProvider,
    n_per_source: int = QUESTIONS_PER_IMAGE,
    taxonomy: Taxonomy | None = None,
    word_limit: int = CONTEXT_WORD_LIMIT,
    max_in_flight: int = 4,
) -> list[BenchmarkItem]:
    """Generate exactly ``n_per_source`` items per attraction.

    A response with the wrong pair count gets one re-ask with the count
    restated; a second miss raises with both counts in the message. Sources
    run through a bounded worker window; output order follows input order.
    """
    taxonomy = taxonomy or Taxonomy()
    for source in sources:
        if source.country not in taxonomy.countries:
            raise GenerationError(
                f"{source.name}: country {source.country!r} not in taxonomy"
            )
        if source.category is not None and source.category not in taxonomy.categories:
            raise GenerationError(
                f"{source.name}: category {source.category!r} not in taxonomy"
            )
        if not source.wiki_text.strip():
            raise GenerationError(f"{source.name}: empty reference article")

    def one_source(source: AttractionSource) -> list[BenchmarkItem]:
        prompt = build_generation_prompt(source, n_per_source, word_limit)
        pairs = _pairs_or_none(provider.complete(prompt, source.image))
        if pairs is None or len(pairs) != n_per_source:
            reminder = (
                f"{prompt}\nYour previous reply did not contain exactly "
                f"{n_per_source} pairs in the required format. Reply again "
                f"with exactly {n_per_source} numbered Q:/A: pairs."
            )
            pairs = _pairs_or_none(provider.complete(reminder, source.image))
            if pairs is None:
                raise GenerationError(
                    f"{source.name}: unparseable response after re-ask"
                )
            if len(pairs) != n_per_source:
                raise GenerationError(
                    f"{source.name}: expected {n_per_source} pairs, "
                    f"got {len(pairs)} after re-ask"
                )
        out: list[BenchmarkItem] = []
        for k, (question, answer) in enumerate(pairs):
            item = BenchmarkItem(
                id=f"{source.country}:{source.name}:{k}",
                country=source.country,
                attraction=source.name,
                image=source.image,
                question=question,
                answer=answer,
                category=source.category,
            )
            item.validate()
            out.append(item)
        return out

    items: list[BenchmarkItem] = []
    for bucket in map_batches(list(sources), one_source, max_in_flight=max_in_flight):
        items.extend(bucket)
    return items


def _pairs_or_none(text: str) -> list[tuple[str, str]] | None:
    try:
        return parse_qa_pairs(text)
    except GenerationError:
        return None


def validate_benchmark(
    items: Iterable[BenchmarkItem],
    taxonomy: Taxonomy | None = None,
    min_images_per_country: int = MIN_IMAGES_PER_COUNTRY,
) -> dict[str, Any]:
    """Structural checks plus a coverage report; never raises.

    Problems land in the report's "violations" list (duplicate ids, items
    outside the taxonomy, invalid fields, too few distinct images per
    covered country) so the caller decides the exit status. The published
    total is compared and reported but a different total is no violation.
    """
    taxonomy = taxonomy or Taxonomy()
    violations: list[str] = []
    seen_ids: set[str] = set()
    images: dict[str, set[str]] = {}
    counts: dict[str, int] = {}
    statuses = {status: 0 for status in REVIEW_STATUSES}
    total = 0
    for item in items:
        total += 1
        try:
            item.validate()
        except RecordValidationError as exc:
            violations.append(str(exc))
        if item.id in seen_ids:
            violations.append(f"duplicate benchmark id {item.id!r}")
        seen_ids.add(item.id)
        if item.country not in taxonomy.countries:
            violations.append(f"item {item.id}: country {item.country!r} not in taxonomy")
        if item.category is not None and item.category not in taxonomy.categories:
            violations.append(f"item {item.id}: category {item.category!r} not in taxonomy")
        if item.review_status in statuses:
            statuses[item.review_status] += 1
        images.setdefault(item.country, set()).add(item.image)
        counts[item.country] = counts.get(item.country, 0) + 1
    for country in taxonomy.countries:
        image_set = images.get(country, set())
        if image_set and len(image_set) < min_images_per_country:
            violations.append(
                f"country {country!r} covers {len(image_set)} images, "
                f"needs at least {min_images_per_country}"
            )
    warnings: list[str] = []
    if not taxonomy.is_canonical:
        warnings.append("taxonomy differs from the canonical country/category lists")
    missing = [c for c in taxonomy.countries if c not in counts]
    if missing:
        warnings.append(f"no items for: {', '.join(missing)}")
    return {
        "total": total,
        "per_country": {c: counts.get(c, 0) for c in taxonomy.countries},
        "images_per_country": {c: len(images.get(c, set())) for c in taxonomy.countries},
        "statuses": statuses,
        "canonical_taxonomy": taxonomy.is_canonical,
        "expected_total": CANONICAL_TOTAL,
        "matches_expected_total": total == CANONICAL_TOTAL,
        "violations": violations,
        "warnings": warnings,
    }
