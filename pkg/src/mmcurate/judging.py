"""Model-as-judge scoring: prompt building, response parsing, aggregation.

Two protocols live here. Rubric judging scores one answer on four fixed
criteria and aggregates to a 0-100 scale. Pairwise judging scores a model
answer against a reference answer and reports per-category relative scores.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from statistics import mean
from typing import Any, Mapping, Sequence

from .cache import FileCache, content_hash
from .errors import JudgmentParseError, ProviderError
from .providers import JudgeProvider

logger = logging.getLogger(__name__)

HENNA_CRITERIA = ("helpfulness", "relevance", "accuracy", "level_of_details")

SCORE_MIN = 1
SCORE_MAX = 10

FORMAT_REMINDER = (
    "Reply with a single JSON object whose keys are exactly Helpfulness, "
    "Relevance, Accuracy, and Level of Details, each mapped to an integer "
    "from 1 to 10. No other text."
)

# Pairwise report categories, in fixed order.
PAIRWISE_CATEGORIES = (
    ("conv", "Conversation"),
    ("detail", "Detail Description"),
    ("complex", "Complex Reasoning"),
)


def _template_text(path: str | Path | None) -> str:
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    ref = resources.files("mmcurate") / "templates" / "henna_judge.txt"
    return ref.read_text(encoding="utf-8")


def build_henna_prompt(
    question: str,
    gold_answer: str,
    model_answer: str,
    template_path: str | Path | None = None,
) -> str:
    """Fill the rubric template. Replacement, not str.format, so the
    template may show a literal JSON example."""
    template = _template_text(template_path)
    for slot in ("{question}", "{gold_answer}", "{model_answer}"):
        if slot not in template:
            raise JudgmentParseError(f"judge template is missing the {slot} slot")
    return (
        template.replace("{question}", question)
        .replace("{gold_answer}", gold_answer)
        .replace("{model_answer}", model_answer)
    )


def _canonical_key(key: str) -> str:
    return "_".join(key.strip().lower().split())


def _first_json_object(text: str) -> dict:
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
        # A non-object literal is skipped; the judgment must be an object.
    raise JudgmentParseError("no JSON object found in judge response")


def parse_judgment(
    text: str,
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> dict[str, int]:
    """Extract criterion scores from a judge response.

    The first well-formed JSON object in the text is the judgment. Keys
    match case-insensitively with spaces and underscores equivalent. Scores
    must be integers in [1, 10]; anything else is a parse error, never a
    silent clamp.
    """
    obj = _first_json_object(text)
    expected = {_canonical_key(c): c for c in criteria}
    scores: dict[str, int] = {}
    for raw_key, value in obj.items():
        if not isinstance(raw_key, str):
            raise JudgmentParseError(f"non-string key {raw_key!r} in judgment")
        key = _canonical_key(raw_key)
        if key not in expected:
            raise JudgmentParseError(f"unexpected criterion {raw_key!r}")
        if key in scores:
            raise JudgmentParseError(f"duplicate criterion {raw_key!r}")
        if isinstance(value, bool) or not isinstance(value, int):
            raise JudgmentParseError(
                f"score for {raw_key!r} must be an integer, got {value!r}"
            )
        if not SCORE_MIN <= value <= SCORE_MAX:
            raise JudgmentParseError(
                f"score {value} for {raw_key!r} outside [{SCORE_MIN}, {SCORE_MAX}]"
            )
        scores[key] = value
    missing = [expected[k] for k in expected if k not in scores]
    if missing:
        raise JudgmentParseError(f"missing criteria: {', '.join(sorted(missing))}")
    return scores


def parse_pair_scores(text: str) -> tuple[float, float]:
    """Two numbers from the first line that holds exactly two of them.

    Pairwise judges conventionally open with "<model> <reference>" scores;
    commas are accepted as separators.
    """
    for line in text.splitlines():
        tokens = [t for t in line.replace(",", " ").split() if t]
        if len(tokens) != 2:
            continue
        try:
            return float(tokens[0]), float(tokens[1])
        except ValueError:
            continue
    raise JudgmentParseError("no score pair found in judge response")


# The judge scores on 1-10; reports scale by 10. The footer carries this
# so a 0-100 table is never mistaken for a native percentage.
NORMALIZATION_NOTE = (
    "Scores are per-criterion means of 1-10 judge ratings, scaled by 10 "
    "to a 0-100 scale."
)


def henna_aggregate(
    judgments: Sequence[Mapping[str, int]],
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> dict[str, float]:
    """Per-criterion mean of 1-10 scores, scaled to 0-100, 2 decimals."""
    if not judgments:
        raise JudgmentParseError("cannot aggregate zero judgments")
    report: dict[str, float] = {}
    for criterion in criteria:
        scores = [j[criterion] for j in judgments if criterion in j]
        if not scores:
            raise JudgmentParseError(f"no scores for criterion {criterion!r}")
        report[criterion] = round(mean(scores) * 10, 2)
    return report


def format_report_row(
    scores: Mapping[str, float],
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> str:
    """One table row in the published layout, e.g. ``62.34 / 68.97 / 49.68 / 49.83``."""
    return " / ".join(f"{scores[c]:.2f}" for c in criteria)


def henna_report(
    by_model: Mapping[str, Sequence[Mapping[str, int]]],
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> dict[str, Any]:
    """Model-by-criterion score table.

    ``by_model`` maps model id to that model's judgments; row order follows
    the input. Each row carries the per-criterion scores and a preformatted
    line in the published column order.
    """
    rows = []
    for model, judgments in by_model.items():
        scores = henna_aggregate(judgments, criteria)
        rows.append(
            {"model": model, "scores": scores, "row": format_report_row(scores, criteria)}
        )
    return {"criteria": list(criteria), "rows": rows, "note": NORMALIZATION_NOTE}


@dataclass
class PairResult:
    item_id: str
    category: str
    model_score: float
    reference_score: float

    def relative(self) -> float:
        if self.reference_score <= 0:
            raise JudgmentParseError(
                f"item {self.item_id}: reference score must be positive"
            )
        return self.model_score / self.reference_score * 100.0


def llava_relative_score(pairs: Sequence[PairResult]) -> dict[str, Any]:
    """Relative-to-reference report with per-category and overall scores.

    The overall score averages per-item relatives across all items, so
    categories weigh by their item counts rather than equally.
    """
    if not pairs:
        raise JudgmentParseError("cannot score zero pairs")
    known = {code for code, _ in PAIRWISE_CATEGORIES}
    for pair in pairs:
        if pair.category not in known:
            raise JudgmentParseError(f"unknown category {pair.category!r}")
    relatives = {code: [] for code in known}
    all_relatives: list[float] = []
    for pair in pairs:
        value = pair.relative()
        relatives[pair.category].append(value)
        all_relatives.append(value)
    categories = []
    for code, name in PAIRWISE_CATEGORIES:
        values = relatives[code]
        categories.append(
            {
                "code": code,
                "name": name,
                "count": len(values),
                "score": round(mean(values), 2) if values else None,
            }
        )
    return {
        "categories": categories,
        "overall": {"count": len(all_relatives), "score": round(mean(all_relatives), 2)},
    }


@dataclass
class JudgeItem:
    id: str
    question: str
    gold_answer: str
    model_answer: str
    image: str | None = None
    country: str | None = None


@dataclass
class JudgingResult:
    judgments: dict[str, dict[str, int]] = field(default_factory=dict)
    unjudged: list[dict[str, str]] = field(default_factory=list)

    @property
    def aggregate(self) -> dict[str, float]:
        return henna_aggregate(list(self.judgments.values()))


def run_judging(
    items: Sequence[JudgeItem],
    provider: JudgeProvider,
    cache: FileCache | None = None,
    raw_path: str | Path | None = None,
    template_path: str | Path | None = None,
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> JudgingResult:
    """Judge every item, parsing scores and keeping all raw output.

    An unparseable response triggers one re-ask with a format reminder
    appended; a second failure leaves the item in ``unjudged`` with its raw
    text. Successful completions are cached by prompt hash, and every final
    raw response is appended to ``raw_path`` so any run can be re-parsed
    offline.
    """
    result = JudgingResult()
    raw_handle = None
    if raw_path is not None:
        Path(raw_path).parent.mkdir(parents=True, exist_ok=True)
        raw_handle = Path(raw_path).open("a", encoding="utf-8")
    try:
        for item in items:
            prompt = build_henna_prompt(
                item.question, item.gold_answer, item.model_answer, template_path
            )
            key = content_hash(prompt)
            raw: str | None = None
            if cache is not None:
                cached = cache.get(provider.provider_id, key)
                if cached is not None:
                    raw = cached["completion"]
            scores: dict[str, int] | None = None
            error: str | None = None
            if raw is not None:
                try:
                    scores = parse_judgment(raw, criteria)
                except JudgmentParseError:
                    raw = None  # stale unusable entry; ask again
            if raw is None:
                attempts = (prompt, f"{prompt}\n\n{FORMAT_REMINDER}")
                for attempt_prompt in attempts:
                    try:
                        raw = provider.complete(attempt_prompt, item.image)
                    except ProviderError as exc:
                        error = str(exc)
                        raw = None
                        continue
                    try:
                        scores = parse_judgment(raw, criteria)
                        error = None
                        break
                    except JudgmentParseError as exc:
                        error = str(exc)
                        scores = None
                if scores is not None and cache is not None and raw is not None:
                    cache.put(provider.provider_id, key, {"completion": raw})
            if raw_handle is not None:
                raw_handle.write(
                    json.dumps(
                        {"id": item.id, "prompt_hash": key, "response": raw or ""},
                        ensure_ascii=False,
                    )
                )
                raw_handle.write("\n")
            if scores is not None:
                result.judgments[item.id] = scores
            else:
                result.unjudged.append(
                    {"id": item.id, "error": error or "unparseable", "raw": raw or ""}
                )
                logger.warning("item %s left unjudged: %s", item.id, error)
    finally:
        if raw_handle is not None:
            raw_handle.close()
    return result


def replay_raw(
    raw_path: str | Path,
    criteria: Sequence[str] = HENNA_CRITERIA,
) -> JudgingResult:
    """Re-parse a persisted raw-response file.

    The last response per item wins, matching the live retry order, so a
    replay reproduces the original run's judgments exactly.
    """
    last: dict[str, str] = {}
    with Path(raw_path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                last[str(entry["id"])] = str(entry["response"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise JudgmentParseError(
                    f"{raw_path}: line {line_number}: bad raw entry ({type(exc).__name__})"
                ) from exc
    result = JudgingResult()
    for item_id, raw in last.items():
        try:
            result.judgments[item_id] = parse_judgment(raw, criteria)
        except JudgmentParseError as exc:
            result.unjudged.append({"id": item_id, "error": str(exc), "raw": raw})
    return result
