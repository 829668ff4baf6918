"""Scripted provider doubles shared across the test suite."""

from __future__ import annotations

from typing import Mapping, Sequence

from mmcurate.errors import ProviderError, RateLimitedError


class ScriptedTranslationProvider:
    """Translates via a fixed text -> text mapping; unknown text is an error."""

    def __init__(self, mapping: Mapping[str, str], provider_id: str = "scripted-mt"):
        self.provider_id = provider_id
        self.mapping = dict(mapping)
        self.batches: list[list[str]] = []

    def translate(self, texts: Sequence[str], src_lang: str, tgt_lang: str) -> list[str]:
        self.batches.append(list(texts))
        missing = [t for t in texts if t not in self.mapping]
        if missing:
            raise ProviderError(f"no translation scripted for {missing[0]!r}")
        return [self.mapping[t] for t in texts]


class MappingEmbeddingProvider:
    """Embeds via a fixed text -> vector mapping; unknown text is an error."""

    def __init__(self, mapping: Mapping[str, Sequence[float]], provider_id: str = "scripted-emb"):
        self.provider_id = provider_id
        self.mapping = {k: list(v) for k, v in mapping.items()}
        self.calls = 0

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        missing = [t for t in texts if t not in self.mapping]
        if missing:
            raise ProviderError(f"no embedding scripted for {missing[0]!r}")
        return [list(self.mapping[t]) for t in texts]


class FlakyProvider:
    """Fails a set number of times before succeeding, to exercise retries."""

    def __init__(self, failures: int, rate_limited: bool = False, retry_after: float | None = None):
        self.provider_id = "flaky"
        self.failures = failures
        self.rate_limited = rate_limited
        self.retry_after = retry_after
        self.attempts = 0

    def __call__(self):
        self.attempts += 1
        if self.attempts <= self.failures:
            if self.rate_limited:
                raise RateLimitedError("slow down", retry_after=self.retry_after)
            raise ProviderError("transient failure")
        return "ok"


class FakeSleep:
    def __init__(self):
        self.delays: list[float] = []

    def __call__(self, seconds: float) -> None:
        self.delays.append(seconds)
