"""Record types, line-delimited I/O, and dataset statistics.

One serialized object per line, UTF-8, no BOM. Field order is fixed per
record kind so identical inputs always produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import RecordParseError, RecordValidationError, StatsError

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
STATUSES = ("pending", "translated", "kept", "rejected", "failed")
TASK_TYPES = ("conversation", "detail", "complex", "vqa", "mcq")

OVERALL = "overall"


def _require(condition: bool, message: str, record_id: str | None = None) -> None:
    if not condition:
        raise RecordValidationError(message, record_id=record_id)


@dataclass
class CaptionRecord:
    """One image-text pair, before or after translation and filtering."""

    id: str
    split: str
    image: str
    src_lang: str
    src_text: str
    tgt_lang: str | None = None
    tgt_text: str | None = None
    sim: float | None = None
    status: str = "pending"
    error: str | None = None

    def validate(self) -> None:
        rid = self.id
        _require(bool(self.id), "id must be non-empty", rid)
        _require(self.split in SPLITS, f"record {rid}: unknown split {self.split!r}", rid)
        _require(self.status in STATUSES, f"record {rid}: unknown status {self.status!r}", rid)
        _require(bool(self.src_text), f"record {rid}: src_text must be non-empty", rid)
        if self.status in ("kept", "rejected"):
            _require(
                self.sim is not None,
                f"record {rid}: status {self.status} requires sim",
                rid,
            )
        if self.status == "pending":
            _require(
                self.tgt_text is None,
                f"record {rid}: pending record must not carry tgt_text",
                rid,
            )
        if self.sim is not None:
            _require(
                -1.0 <= self.sim <= 1.0,
                f"record {rid}: sim {self.sim} outside [-1, 1]",
                rid,
            )


@dataclass
class VqaRecord:
    """A question with its gold answers, before or after translation."""

    id: str
    split: str
    image: str
    question_src: str
    answers_src: list[str]
    question_tgt: str | None = None
    answers_tgt: list[str] | None = None
    sims: dict[str, float] = field(default_factory=dict)
    status: str = "pending"
    src_lang: str = "en"
    tgt_lang: str | None = None
    error: str | None = None

    def validate(self) -> None:
        rid = self.id
        _require(bool(self.id), "id must be non-empty", rid)
        _require(self.split in SPLITS, f"record {rid}: unknown split {self.split!r}", rid)
        _require(self.status in STATUSES, f"record {rid}: unknown status {self.status!r}", rid)
        _require(bool(self.question_src), f"record {rid}: question_src must be non-empty", rid)
        _require(
            len(self.answers_src) > 0,
            f"record {rid}: answers_src must be non-empty",
            rid,
        )
        if self.answers_tgt is not None:
            _require(
                len(self.answers_tgt) == len(self.answers_src),
                f"record {rid}: answers_tgt length {len(self.answers_tgt)} != "
                f"answers_src length {len(self.answers_src)}",
                rid,
            )
        if self.status in ("kept", "rejected"):
            _require(
                len(self.sims) > 0,
                f"record {rid}: status {self.status} requires sims",
                rid,
            )
        for name, value in self.sims.items():
            _require(
                -1.0 <= value <= 1.0,
                f"record {rid}: sims[{name}] = {value} outside [-1, 1]",
                rid,
            )

    def gated_fields(self) -> list[str]:
        """Field keys that carry a similarity once the record is filtered."""
        return ["question"] + [f"answer_{i}" for i in range(len(self.answers_src))]


@dataclass
class InstructionRecord:
    """One instruction/response pair ready for supervised finetuning."""

    id: str
    image: str
    task_type: str
    instruction: str
    response: str
    choices: list[str] | None = None
    history: list[tuple[str, str]] | None = None

    def validate(self) -> None:
        rid = self.id
        _require(bool(self.id), "id must be non-empty", rid)
        _require(
            self.task_type in TASK_TYPES,
            f"record {rid}: unknown task_type {self.task_type!r}",
            rid,
        )
        _require(bool(self.response), f"record {rid}: response must be non-empty", rid)
        if self.task_type == "mcq":
            _require(
                self.choices is not None and len(self.choices) >= 2,
                f"record {rid}: mcq record requires at least 2 choices",
                rid,
            )
        if self.history is not None:
            for pair in self.history:
                _require(
                    len(pair) == 2,
                    f"record {rid}: history entries must be (instruction, response) pairs",
                    rid,
                )


@dataclass
class SplitStats:
    """Kept/input counts for one split of one dataset."""

    dataset_name: str
    split: str
    count_in: int
    count_kept: int
    reduction_ratio: float

    def validate(self) -> None:
        _require(self.count_in >= 0, f"{self.dataset_name}/{self.split}: negative count_in")
        _require(
            0 <= self.count_kept <= self.count_in,
            f"{self.dataset_name}/{self.split}: count_kept {self.count_kept} "
            f"exceeds count_in {self.count_in}",
        )
        expected = 1.0 - self.count_kept / self.count_in if self.count_in > 0 else 0.0
        _require(
            abs(self.reduction_ratio - expected) < 1e-12,
            f"{self.dataset_name}/{self.split}: reduction_ratio {self.reduction_ratio} "
            f"inconsistent with counts",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_name": self.dataset_name,
            "split": self.split,
            "count_in": self.count_in,
            "count_kept": self.count_kept,
            "reduction_ratio": self.reduction_ratio,
        }


# Registry of record kinds usable with load_records/write_records. Other
# modules (benchmark generation) register their own kinds at import time.
SCHEMAS: dict[str, type] = {
    "caption": CaptionRecord,
    "vqa": VqaRecord,
    "instruction": InstructionRecord,
}


def register_schema(kind: str, cls: type) -> None:
    SCHEMAS[kind] = cls


def record_to_dict(record: Any) -> dict[str, Any]:
    """Serialize in declared field order, dropping absent optionals."""
    out: dict[str, Any] = {}
    for f in fields(record):
        value = getattr(record, f.name)
        if value is None:
            continue
        if f.name == "history" and value is not None:
            value = [list(pair) for pair in value]
        out[f.name] = value
    return out


def record_from_dict(cls: type, data: dict[str, Any], *, strict: bool = True) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = [k for k in data if k not in known]
    if unknown:
        if strict:
            raise RecordParseError(f"unknown field {unknown[0]!r} for {cls.__name__}")
        logger.warning("ignoring unknown fields %s for %s", unknown, cls.__name__)
        data = {k: v for k, v in data.items() if k in known}
    if "history" in data and data["history"] is not None:
        data = dict(data)
        data["history"] = [tuple(pair) for pair in data["history"]]
    try:
        record = cls(**data)
    except TypeError as exc:
        raise RecordParseError(f"cannot build {cls.__name__}: {exc}") from exc
    record.validate()
    return record


def load_records(
    path: str | Path,
    schema: str,
    *,
    strict: bool = True,
    dataset_name: str | None = None,
) -> Iterator[Any]:
    """Yield validated records from a line-delimited file, in file order.

    Errors carry the 1-based line number. When ``dataset_name`` is given,
    lines missing an ``id`` get a deterministic ``<dataset>:<split>:<ordinal>``
    id (ordinal counts per split).
    """
    if schema not in SCHEMAS:
        raise RecordParseError(f"unknown schema {schema!r}")
    cls = SCHEMAS[schema]
    path = Path(path)
    ordinals: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(
                    f"{path}: line {line_number}: parse failure ({exc.msg})",
                    line_number=line_number,
                ) from exc
            if not isinstance(data, dict):
                raise RecordParseError(
                    f"{path}: line {line_number}: parse failure (not an object)",
                    line_number=line_number,
                )
            if "id" not in data and dataset_name is not None:
                split = data.get("split", "train")
                ordinal = ordinals.get(split, 0)
                ordinals[split] = ordinal + 1
                data["id"] = f"{dataset_name}:{split}:{ordinal}"
            try:
                yield record_from_dict(cls, data, strict=strict)
            except (RecordParseError, RecordValidationError) as exc:
                raise RecordParseError(
                    f"{path}: line {line_number}: {exc}", line_number=line_number
                ) from exc


def write_records(path: str | Path, records: Iterable[Any]) -> int:
    """Write one record per line, atomically replacing ``path``.

    Records are validated first; an invalid record aborts the write with its
    id in the message and leaves any existing file untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            for record in records:
                record.validate()
                handle.write(json.dumps(record_to_dict(record), ensure_ascii=False))
                handle.write("\n")
                count += 1
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return count


def compute_stats(
    before: Iterable[Any],
    after: Iterable[Any],
    name: str,
) -> list[SplitStats]:
    """Per-split kept counts and reduction ratios, plus an overall row.

    ``after`` ids must be a subset of ``before`` ids within each split.
    """
    before_ids: dict[str, set[str]] = {}
    for record in before:
        before_ids.setdefault(record.split, set()).add(record.id)
    after_counts: dict[str, int] = {}
    for record in after:
        ids = before_ids.get(record.split)
        if ids is None or record.id not in ids:
            raise StatsError(
                f"{name}: record {record.id!r} in split {record.split!r} "
                f"is absent from the before source"
            )
        after_counts[record.split] = after_counts.get(record.split, 0) + 1

    rows: list[SplitStats] = []
    total_in = 0
    total_kept = 0
    for split in SPLITS:
        if split not in before_ids:
            continue
        count_in = len(before_ids[split])
        count_kept = after_counts.get(split, 0)
        total_in += count_in
        total_kept += count_kept
        ratio = 1.0 - count_kept / count_in if count_in > 0 else 0.0
        rows.append(SplitStats(name, split, count_in, count_kept, ratio))
    overall_ratio = 1.0 - total_kept / total_in if total_in > 0 else 0.0
    rows.append(SplitStats(name, OVERALL, total_in, total_kept, overall_ratio))
    for row in rows:
        row.validate()
    return rows


def stats_from_counts(name: str, counts: dict[str, tuple[int, int]]) -> list[SplitStats]:
    """Build stats rows from already-known (count_in, count_kept) pairs.

    ``counts`` maps split name to the pair; an overall row is appended.
    """
    rows: list[SplitStats] = []
    total_in = 0
    total_kept = 0
    for split in SPLITS:
        if split not in counts:
            continue
        count_in, count_kept = counts[split]
        total_in += count_in
        total_kept += count_kept
        ratio = 1.0 - count_kept / count_in if count_in > 0 else 0.0
        rows.append(SplitStats(name, split, count_in, count_kept, ratio))
    overall_ratio = 1.0 - total_kept / total_in if total_in > 0 else 0.0
    rows.append(SplitStats(name, OVERALL, total_in, total_kept, overall_ratio))
    for row in rows:
        row.validate()
    return rows
