"""Translate records, embed both sides, and keep only faithful translations.

The pipeline is fail-soft: a record whose provider calls keep failing is
marked ``failed`` with a cause and the run continues. Every record that
reaches the filter gets a decision line, so |kept| + |rejected| + |failed|
always equals |input|.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .cache import FileCache, content_hash
from .errors import MmcurateError, ProviderError
from .providers import EmbeddingProvider, TranslationProvider, map_batches
from .records import (
    CaptionRecord,
    VqaRecord,
    record_to_dict,
    stats_from_counts,
    write_records,
)

logger = logging.getLogger(__name__)

THRESHOLD_DEFAULT = 0.80

SIM_CACHE_ID = "sims"


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Raises on dimension mismatch and on zero vectors; a zero vector has no
    direction, so its similarity is undefined rather than 0.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise ValueError("cosine_similarity expects 1-d vectors")
    if va.shape[0] != vb.shape[0]:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_similarity is undefined for zero vectors")
    value = float(np.dot(va, vb) / (na * nb))
    return max(-1.0, min(1.0, value))


@dataclass
class FilterConfig:
    threshold: float = THRESHOLD_DEFAULT
    # strict_greater keeps sim > threshold; greater_equal keeps sim >= threshold.
    mode: str = "strict_greater"
    # all_fields gates every field of a record; concatenated joins the fields
    # into one text per side and gates the single similarity.
    policy: str = "all_fields"
    batch_size: int = 32
    max_in_flight: int = 4
    # (max_attempts, backoff schedule); handed to providers the caller builds.
    retry: tuple[int, tuple[float, ...]] = (3, (1.0, 4.0, 16.0))

    def __post_init__(self) -> None:
        if self.mode not in ("strict_greater", "greater_equal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.policy not in ("all_fields", "concatenated"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} outside (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        attempts, schedule = self.retry
        if attempts < 1 or len(schedule) < attempts - 1:
            raise ValueError("retry needs a backoff delay per re-attempt")

    def keeps(self, sim: float) -> bool:
        if self.mode == "strict_greater":
            return sim > self.threshold
        return sim >= self.threshold


@dataclass
class FilterDecision:
    record_id: str
    decision: str
    threshold: float
    mode: str
    sims: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "decision": self.decision,
            "threshold": self.threshold,
            "mode": self.mode,
            "sims": self.sims,
        }


def _chunk(items: list, size: int) -> list[list]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def _record_texts(record: Any) -> list[str]:
    if isinstance(record, CaptionRecord):
        return [record.src_text]
    if isinstance(record, VqaRecord):
        return [record.question_src] + list(record.answers_src)
    raise MmcurateError(f"unsupported record type {type(record).__name__}")


def translate_records(
    records: Iterable[Any],
    provider: TranslationProvider,
    cache: FileCache | None,
    src_lang: str,
    tgt_lang: str,
    config: FilterConfig | None = None,
) -> list[Any]:
    """Fill tgt fields on caption and VQA records, batching provider calls.

    Translations are cached per text under the provider id, so reruns only
    pay for texts the cache has not seen. Records whose texts cannot be
    translated after retries come back with status ``failed``.
    """
    config = config or FilterConfig()
    records = list(records)

    def key_for(text: str) -> str:
        return content_hash(src_lang, tgt_lang, text)

    needed: list[str] = []
    seen: set[str] = set()
    translations: dict[str, str] = {}
    for record in records:
        for text in _record_texts(record):
            key = key_for(text)
            if key in seen:
                continue
            seen.add(key)
            cached = cache.get(provider.provider_id, key) if cache else None
            if cached is not None:
                translations[key] = cached["text"]
            else:
                needed.append(text)

    failures: dict[str, str] = {}
    batches = _chunk(needed, config.batch_size)

    def run_batch(batch: list[str]) -> list[tuple[str, str | None, str | None]]:
        try:
            return [(t, out, None) for t, out in zip(batch, provider.translate(batch, src_lang, tgt_lang))]
        except ProviderError:
            # Isolate the failing text: blame must land on the record that
            # caused it, not on whoever shared its batch.
            results = []
            for text in batch:
                try:
                    results.append((text, provider.translate([text], src_lang, tgt_lang)[0], None))
                except ProviderError as exc:
                    results.append((text, None, str(exc)))
            return results

    for batch_result in map_batches(batches, run_batch, config.max_in_flight):
        for text, translated, error in batch_result:
            key = key_for(text)
            if translated is None:
                failures[key] = error or "translation failed"
                continue
            translations[key] = translated
            if cache:
                cache.put(provider.provider_id, key, {"text": translated})

    out: list[Any] = []
    for record in records:
        texts = _record_texts(record)
        missing = [t for t in texts if key_for(t) not in translations]
        if missing:
            record.status = "failed"
            record.error = failures.get(key_for(missing[0]), "translation failed")
            out.append(record)
            continue
        if isinstance(record, CaptionRecord):
            record.tgt_lang = tgt_lang
            record.tgt_text = translations[key_for(record.src_text)]
        else:
            record.tgt_lang = tgt_lang
            record.question_tgt = translations[key_for(record.question_src)]
            record.answers_tgt = [translations[key_for(a)] for a in record.answers_src]
        record.status = "translated"
        out.append(record)
    return out


def _field_pairs(record: Any, policy: str) -> list[tuple[str, str, str]]:
    """(field_key, src_text, tgt_text) triples to gate for one record."""
    if isinstance(record, CaptionRecord):
        assert record.tgt_text is not None
        return [("text", record.src_text, record.tgt_text)]
    assert record.question_tgt is not None and record.answers_tgt is not None
    if policy == "concatenated":
        src = "\n".join([record.question_src] + list(record.answers_src))
        tgt = "\n".join([record.question_tgt] + list(record.answers_tgt))
        return [("text", src, tgt)]
    pairs = [("question", record.question_src, record.question_tgt)]
    for i, (a_src, a_tgt) in enumerate(zip(record.answers_src, record.answers_tgt)):
        pairs.append((f"answer_{i}", a_src, a_tgt))
    return pairs


def filter_records(
    records: Iterable[Any],
    provider: EmbeddingProvider,
    cache: FileCache | None,
    config: FilterConfig | None = None,
) -> tuple[list[Any], list[Any], list[Any], list[FilterDecision]]:
    """Partition translated records into (kept, rejected, failed, decisions).

    Similarities are cached per (source, translation) pair under the
    embedding provider id; embeddings themselves are recomputed as needed.
    """
    config = config or FilterConfig()
    records = list(records)
    cache_id = f"{SIM_CACHE_ID}-{provider.provider_id}"

    active = [r for r in records if r.status == "translated"]
    prior_failed = [r for r in records if r.status == "failed"]

    def pair_key(src: str, tgt: str) -> str:
        return content_hash(src, tgt)

    sims: dict[str, float] = {}
    texts_needed: list[str] = []
    text_index: dict[str, int] = {}
    pending_pairs: list[tuple[str, str]] = []
    for record in active:
        for _, src, tgt in _field_pairs(record, config.policy):
            key = pair_key(src, tgt)
            if key in sims:
                continue
            cached = cache.get(cache_id, key) if cache else None
            if cached is not None:
                sims[key] = float(cached["sim"])
                continue
            sims[key] = float("nan")
            pending_pairs.append((src, tgt))
            for text in (src, tgt):
                if text not in text_index:
                    text_index[text] = len(texts_needed)
                    texts_needed.append(text)

    embed_failures: dict[str, str] = {}
    vectors: dict[str, list[float]] = {}
    batches = _chunk(texts_needed, config.batch_size)

    def run_batch(batch: list[str]) -> list[tuple[str, list[float] | None, str | None]]:
        try:
            return [(t, v, None) for t, v in zip(batch, provider.embed(batch))]
        except ProviderError:
            results = []
            for text in batch:
                try:
                    results.append((text, provider.embed([text])[0], None))
                except ProviderError as exc:
                    results.append((text, None, str(exc)))
            return results

    for batch_result in map_batches(batches, run_batch, config.max_in_flight):
        for text, vec, error in batch_result:
            if vec is None:
                embed_failures[text] = error or "embedding failed"
            else:
                vectors[text] = vec

    for src, tgt in pending_pairs:
        if src in vectors and tgt in vectors:
            sim = cosine_similarity(vectors[src], vectors[tgt])
            key = pair_key(src, tgt)
            sims[key] = sim
            if cache:
                cache.put(cache_id, key, {"sim": sim})

    kept: list[Any] = []
    rejected: list[Any] = []
    failed: list[Any] = list(prior_failed)
    decisions: list[FilterDecision] = []
    for record in active:
        pairs = _field_pairs(record, config.policy)
        record_sims: dict[str, float] = {}
        missing_cause: str | None = None
        for field_key, src, tgt in pairs:
            sim = sims[pair_key(src, tgt)]
            if sim != sim:  # NaN: embedding never arrived
                missing_cause = embed_failures.get(src) or embed_failures.get(
                    tgt, "embedding failed"
                )
                break
            record_sims[field_key] = sim
        if missing_cause is not None:
            record.status = "failed"
            record.error = missing_cause
            failed.append(record)
            continue
        keep = all(config.keeps(s) for s in record_sims.values())
        if isinstance(record, CaptionRecord):
            record.sim = record_sims["text"]
        else:
            record.sims = record_sims
        record.status = "kept" if keep else "rejected"
        decisions.append(
            FilterDecision(
                record_id=record.id,
                decision="keep" if keep else "reject",
                threshold=config.threshold,
                mode=config.mode,
                sims=record_sims,
            )
        )
        (kept if keep else rejected).append(record)
    return kept, rejected, failed, decisions


def run_pipeline(
    records: Iterable[Any],
    translation: TranslationProvider,
    embedding: EmbeddingProvider,
    cache: FileCache | None,
    out_dir: str | Path,
    src_lang: str,
    tgt_lang: str,
    config: FilterConfig | None = None,
    dataset_name: str = "dataset",
) -> dict[str, Any]:
    """Translate, filter, and write all outputs under ``out_dir``.

    Outputs: kept.jsonl, rejected.jsonl, failed.jsonl, decisions.jsonl, and
    stats.json. Output order follows input order and nothing time-dependent
    is written, so reruns over identical inputs produce identical bytes.
    """
    config = config or FilterConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = list(records)
    order = {r.id: i for i, r in enumerate(records)}

    translated = translate_records(records, translation, cache, src_lang, tgt_lang, config)
    kept, rejected, failed, decisions = filter_records(translated, embedding, cache, config)

    for bucket in (kept, rejected, failed):
        bucket.sort(key=lambda r: order[r.id])
    decisions.sort(key=lambda d: order[d.record_id])

    write_records(out_dir / "kept.jsonl", kept)
    write_records(out_dir / "rejected.jsonl", rejected)
    write_records(out_dir / "failed.jsonl", failed)
    with (out_dir / "decisions.jsonl").open("w", encoding="utf-8") as handle:
        for decision in decisions:
            handle.write(json.dumps(decision.to_dict(), ensure_ascii=False))
            handle.write("\n")

    counts: dict[str, tuple[int, int]] = {}
    for record in records:
        count_in, count_kept = counts.get(record.split, (0, 0))
        counts[record.split] = (count_in + 1, count_kept)
    for record in kept:
        count_in, count_kept = counts[record.split]
        counts[record.split] = (count_in, count_kept + 1)
    stats_rows = stats_from_counts(dataset_name, counts)

    summary = {
        "input": len(records),
        "kept": len(kept),
        "rejected": len(rejected),
        "failed": len(failed),
        "threshold": config.threshold,
        "mode": config.mode,
        "stats": [row.to_dict() for row in stats_rows],
    }
    if len(kept) + len(rejected) + len(failed) != len(records):
        raise MmcurateError("pipeline lost records: partition does not cover input")
    with (out_dir / "stats.json").open("w", encoding="utf-8") as handle:
        json.dump(summary, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    return summary


def pipeline_records_dump(records: Iterable[Any]) -> list[dict[str, Any]]:
    return [record_to_dict(r) for r in records]
