"""Answer normalization and accuracy metrics for open and multiple-choice VQA.

Normalization is configurable but the defaults target Arabic model output:
NFKC, diacritic stripping, alef/taa-marbuta unification, punctuation
removal, whitespace collapse, casefold. The cascade runs to a fixpoint so
normalize(normalize(x)) == normalize(x) holds for every input.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import StatsError

# Harakat, tanween, shadda, sukun, plus the superscript alef.
_DIACRITICS = {chr(cp) for cp in range(0x064B, 0x0653)} | {"ٰ"}

_ALEF_MAP = {
    "آ": "ا",  # alef madda
    "أ": "ا",  # alef hamza above
    "إ": "ا",  # alef hamza below
}

_TAA_MAP = {"ة": "ه"}  # taa marbuta -> heh

UNICODE_FORMS = ("none", "compatibility-composed")

_MAX_PASSES = 8


@dataclass(frozen=True)
class NormalizationSpec:
    unicode_form: str = "compatibility-composed"
    strip_diacritics: bool = True
    unify_alef: bool = True
    unify_taa_marbuta: bool = True
    strip_punct: bool = True
    collapse_whitespace: bool = True
    casefold_latin: bool = True

    def __post_init__(self) -> None:
        if self.unicode_form not in UNICODE_FORMS:
            raise ValueError(f"unicode_form must be one of {UNICODE_FORMS}")


DEFAULT_NORMALIZATION = NormalizationSpec()


def _one_pass(text: str, spec: NormalizationSpec) -> str:
    if spec.unicode_form == "compatibility-composed":
        text = unicodedata.normalize("NFKC", text)
    if spec.strip_diacritics:
        text = "".join(ch for ch in text if ch not in _DIACRITICS)
    if spec.unify_alef:
        text = "".join(_ALEF_MAP.get(ch, ch) for ch in text)
    if spec.unify_taa_marbuta:
        text = "".join(_TAA_MAP.get(ch, ch) for ch in text)
    if spec.strip_punct:
        text = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    if spec.collapse_whitespace:
        text = " ".join(text.split())
    if spec.casefold_latin:
        text = text.casefold()
    return text


def normalize_answer(text: str, spec: NormalizationSpec = DEFAULT_NORMALIZATION) -> str:
    """Apply the cascade until the text stops changing.

    A single ordered pass is not idempotent on adversarial input (stripping
    punctuation can expose a combining mark that the next NFKC would fold),
    so the pass repeats, bounded, until fixpoint.
    """
    for _ in range(_MAX_PASSES):
        out = _one_pass(text, spec)
        if out == text:
            return out
        text = out
    raise StatsError("normalization did not converge")


def exact_match_open(
    prediction: str,
    golds: Sequence[str],
    spec: NormalizationSpec = DEFAULT_NORMALIZATION,
) -> bool:
    """True when the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise StatsError("exact_match_open requires at least one gold answer")
    norm_pred = normalize_answer(prediction, spec)
    return any(norm_pred == normalize_answer(g, spec) for g in golds)


def vqa_accuracy(
    predictions: Mapping[str, str],
    golds: Mapping[str, Sequence[str]],
    spec: NormalizationSpec = DEFAULT_NORMALIZATION,
    require_full_coverage: bool = True,
) -> dict:
    """Exact-match accuracy over an item-keyed gold map, with per-item verdicts.

    An item with no prediction counts as wrong when require_full_coverage is
    on, which keeps the denominator fixed across models; with it off the
    item is left out of the verdict map and the denominator shrinks.
    """
    if not golds:
        raise StatsError("vqa_accuracy requires at least one item")
    unknown = [item_id for item_id in predictions if item_id not in golds]
    if unknown:
        raise StatsError(
            f"{len(unknown)} predictions for unknown items, first: {sorted(unknown)[0]}"
        )
    verdicts: dict[str, bool] = {}
    for item_id, gold in golds.items():
        if item_id in predictions:
            verdicts[item_id] = exact_match_open(predictions[item_id], gold, spec)
        elif require_full_coverage:
            verdicts[item_id] = False
    if not verdicts:
        raise StatsError("no predicted items to score")
    correct = sum(verdicts.values())
    return {
        "accuracy": correct / len(verdicts),
        "correct": correct,
        "total": len(verdicts),
        "verdicts": verdicts,
    }


# Characters accepted between an answer label and the rest of a response.
CHOICE_SEPARATORS = (".", "،", ":", ")", "-", " ", "۔")


def extract_choice(
    response: str,
    labels: Sequence[str],
    choices: Sequence[str],
    spec: NormalizationSpec = DEFAULT_NORMALIZATION,
) -> int | None:
    """Map a free-form response to an option index, or None to abstain.

    Cascade: exact label match, then label followed by a separator at the
    start of the response, then normalized equality against a full choice
    text; full-text ties resolve to the lowest index. Abstentions score as
    wrong downstream so denominators stay fixed across models.
    """
    if len(labels) != len(choices):
        raise StatsError(f"{len(labels)} labels but {len(choices)} choices")
    if len(choices) < 2:
        raise StatsError("extract_choice needs at least two options")
    stripped = response.strip()
    # longer labels first, so a two-character label wins over its one-character prefix
    ordered = sorted(range(len(labels)), key=lambda i: -len(labels[i]))
    for i in ordered:
        if stripped == labels[i]:
            return i
    for i in ordered:
        label = labels[i]
        if (
            stripped.startswith(label)
            and len(stripped) > len(label)
            and stripped[len(label)] in CHOICE_SEPARATORS
        ):
            return i
    norm_resp = normalize_answer(stripped, spec)
    if norm_resp:
        for i, choice in enumerate(choices):
            if normalize_answer(choice, spec) == norm_resp:
                return i
    return None


@dataclass
class McqItem:
    """One multiple-choice item: parallel labels and choices plus the gold index."""

    item_id: str
    labels: list[str]
    choices: list[str]
    gold_index: int
    dimension: str | None = None


def mcq_accuracy(
    predictions: Mapping[str, str],
    items: Sequence[McqItem],
    spec: NormalizationSpec = DEFAULT_NORMALIZATION,
    require_full_coverage: bool = True,
) -> dict:
    """Letter-choice accuracy; abstentions and missing predictions count as wrong."""
    if not items:
        raise StatsError("mcq_accuracy requires at least one item")
    seen: set[str] = set()
    for item in items:
        if item.item_id in seen:
            raise StatsError(f"duplicate item {item.item_id}")
        seen.add(item.item_id)
        if not 0 <= item.gold_index < len(item.choices):
            raise StatsError(f"item {item.item_id}: gold index {item.gold_index} out of range")
    unknown = [item_id for item_id in predictions if item_id not in seen]
    if unknown:
        raise StatsError(
            f"{len(unknown)} predictions for unknown items, first: {sorted(unknown)[0]}"
        )
    verdicts: dict[str, bool] = {}
    for item in items:
        if item.item_id in predictions:
            got = extract_choice(predictions[item.item_id], item.labels, item.choices, spec)
            verdicts[item.item_id] = got == item.gold_index
        elif require_full_coverage:
            verdicts[item.item_id] = False
    if not verdicts:
        raise StatsError("no predicted items to score")
    correct = sum(verdicts.values())
    return {
        "accuracy": correct / len(verdicts),
        "correct": correct,
        "total": len(verdicts),
        "verdicts": verdicts,
    }


# Evaluation dimensions, in fixed report order.
SEED_DIMENSIONS = (
    ("IA", "Instance Attributes"),
    ("II", "Instance Identity"),
    ("IN", "Instance Interaction"),
    ("IL", "Instance Location"),
    ("IC", "Instances Counting"),
    ("SU", "Scene Understanding"),
    ("SR", "Spatial Relation"),
    ("VR", "Visual Reasoning"),
)

SEED_DIMENSION_CODES = tuple(code for code, _ in SEED_DIMENSIONS)


def dimension_report(
    predictions: Mapping[str, str],
    items: Sequence[McqItem],
    spec: NormalizationSpec = DEFAULT_NORMALIZATION,
    registry: Sequence[tuple[str, str]] = SEED_DIMENSIONS,
) -> dict:
    """Per-dimension accuracy table for dimension-tagged multiple-choice items.

    The result is keyed by dimension code in registry order; every
    registered dimension appears even with zero items (accuracy None).
    Every item must carry a registered tag. Missing predictions score as
    wrong, like abstentions.
    """
    scored = mcq_accuracy(predictions, items, spec)
    names = dict(registry)
    counts = {code: 0 for code, _ in registry}
    correct = {code: 0 for code, _ in registry}
    for item in items:
        if not item.dimension:
            raise StatsError(f"item {item.item_id} has no dimension tag")
        if item.dimension not in counts:
            raise StatsError(f"unknown dimension code {item.dimension!r}")
        counts[item.dimension] += 1
        if scored["verdicts"][item.item_id]:
            correct[item.dimension] += 1
    dimensions = {
        code: {
            "name": names[code],
            "count": counts[code],
            "correct": correct[code],
            "accuracy": correct[code] / counts[code] if counts[code] else None,
        }
        for code, _ in registry
    }
    return {
        "dimensions": dimensions,
        "overall": {
            "count": scored["total"],
            "correct": scored["correct"],
            "accuracy": scored["accuracy"],
        },
    }


def format_dimension_table(report: dict) -> str:
    """Fixed-width text rendering of a dimension_report result."""
    dims = report["dimensions"]
    width = max([len(row["name"]) for row in dims.values()] + [len("overall")])
    lines = []
    for code, row in dims.items():
        acc = "-" if row["accuracy"] is None else f"{row['accuracy']:.4f}"
        lines.append(f"{code:<4} {row['name']:<{width}} {row['count']:>6} {acc:>8}")
    overall = report["overall"]
    acc = "-" if overall["accuracy"] is None else f"{overall['accuracy']:.4f}"
    lines.append(f"{'ALL':<4} {'overall':<{width}} {overall['count']:>6} {acc:>8}")
    return "\n".join(lines)


def load_predictions(path: str | Path) -> dict[str, dict[str, str]]:
    """Read line-delimited {item_id, model_id, output} rows, grouped by model.

    Files may mix models; a repeated (item_id, model_id) pair is an error.
    """
    per_model: dict[str, dict[str, str]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                item_id = str(row["item_id"])
                model_id = str(row["model_id"])
                output = str(row["output"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise StatsError(
                    f"{path}: line {line_number}: bad prediction row ({type(exc).__name__})"
                ) from exc
            bucket = per_model.setdefault(model_id, {})
            if item_id in bucket:
                raise StatsError(
                    f"{path}: line {line_number}: duplicate prediction "
                    f"for ({item_id}, {model_id})"
                )
            bucket[item_id] = output
    return per_model
