"""Provider interfaces plus local test doubles and HTTP adapters.

Every external call goes through one of three small protocols so the rest of
the toolkit never touches a network library directly. The HTTP adapters talk
JSON to a configurable endpoint; keys come from environment variables and are
never logged.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Protocol, Sequence

import requests

from .errors import ProviderError, RateLimitedError

logger = logging.getLogger(__name__)

# attempt i sleeps BACKOFF_BASE ** i seconds: 1, 4, 16
MAX_ATTEMPTS = 3
BACKOFF_SCHEDULE = (1.0, 4.0, 16.0)


class TranslationProvider(Protocol):
    provider_id: str

    def translate(self, texts: Sequence[str], src_lang: str, tgt_lang: str) -> list[str]: ...


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class JudgeProvider(Protocol):
    provider_id: str

    def complete(self, prompt: str, image: str | None = None) -> str: ...


class RetryPolicy:
    """Retries a callable on provider errors with a fixed backoff schedule.

    ``sleep`` is injectable so tests never wait. A RateLimitedError with a
    retry_after hint overrides the scheduled delay for that attempt.
    """

    def __init__(
        self,
        max_attempts: int = MAX_ATTEMPTS,
        schedule: Sequence[float] = BACKOFF_SCHEDULE,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.max_attempts = max_attempts
        self.schedule = tuple(schedule)
        self.sleep = sleep

    def run(self, fn: Callable[[], Any]) -> Any:
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                return fn()
            except RateLimitedError as exc:
                last = exc
                if attempt + 1 >= self.max_attempts:
                    break
                delay = self.schedule[min(attempt, len(self.schedule) - 1)]
                if exc.retry_after is not None:
                    delay = exc.retry_after
                logger.warning("rate limited, retrying in %.1fs", delay)
                self.sleep(delay)
            except ProviderError as exc:
                last = exc
                if attempt + 1 >= self.max_attempts:
                    break
                delay = self.schedule[min(attempt, len(self.schedule) - 1)]
                logger.warning("provider error (%s), retrying in %.1fs", exc, delay)
                self.sleep(delay)
        raise ProviderError(f"gave up after {self.max_attempts} attempts: {last}") from last


class EchoTranslationProvider:
    """Returns inputs unchanged, tagged with the target language."""

    def __init__(self, tag: bool = False):
        self.provider_id = "echo"
        self.tag = tag
        self.calls = 0

    def translate(self, texts: Sequence[str], src_lang: str, tgt_lang: str) -> list[str]:
        self.calls += 1
        if self.tag:
            return [f"[{tgt_lang}] {t}" for t in texts]
        return list(texts)


class HashEmbeddingProvider:
    """Deterministic local embeddings from hashed character n-grams.

    Each text maps to a fixed-dimension unit vector. Identical texts get
    identical vectors; similar texts share n-grams and land close together.
    No network, no model weights.
    """

    def __init__(self, dim: int = 256, n: int = 3):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.provider_id = f"hashngram-{n}-{dim}"
        self.dim = dim
        self.n = n

    def _vector(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        padded = f"  {text.lower()}  "
        for i in range(len(padded) - self.n + 1):
            gram = padded[i : i + self.n]
            digest = hashlib.sha256(gram.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return [v / norm for v in vec]

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._vector(t) for t in texts]


class ScriptedJudgeProvider:
    """Replays canned responses in order; raises when the script runs out."""

    def __init__(self, responses: Sequence[str], provider_id: str = "scripted-judge"):
        self.provider_id = provider_id
        self.responses = list(responses)
        self.calls: list[str] = []

    def complete(self, prompt: str, image: str | None = None) -> str:
        self.calls.append(prompt)
        if not self.responses:
            raise ProviderError("scripted judge exhausted")
        return self.responses.pop(0)


def _api_key(env_var: str) -> str:
    key = os.environ.get(env_var, "")
    if not key:
        raise ProviderError(f"{env_var} is not set")
    return key


def _post_json(url: str, payload: dict, key: str, timeout: float) -> dict:
    try:
        resp = requests.post(
            url,
            json=payload,
            headers={"Authorization": f"Bearer {key}"},
            timeout=timeout,
        )
    except requests.RequestException as exc:
        raise ProviderError(f"request failed: {type(exc).__name__}") from exc
    if resp.status_code == 429:
        retry_after = None
        header = resp.headers.get("Retry-After")
        if header is not None:
            try:
                retry_after = float(header)
            except ValueError:
                pass
        raise RateLimitedError("rate limited", retry_after=retry_after)
    if resp.status_code >= 400:
        # Body is deliberately excluded: error pages can echo the payload.
        raise ProviderError(f"HTTP {resp.status_code} from provider")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProviderError("provider returned non-JSON body") from exc


class HttpTranslationProvider:
    """POSTs {"texts", "src_lang", "tgt_lang"}, expects {"translations"}."""

    def __init__(
        self,
        url: str,
        provider_id: str = "http-translate",
        env_var: str = "TRANSLATE_API_KEY",
        api_key: str | None = None,
        timeout: float = 60.0,
        retry: RetryPolicy | None = None,
    ):
        self.url = url
        self.provider_id = provider_id
        self.env_var = env_var
        self.api_key = api_key
        self.timeout = timeout
        self.retry = retry or RetryPolicy()

    def translate(self, texts: Sequence[str], src_lang: str, tgt_lang: str) -> list[str]:
        key = self.api_key or _api_key(self.env_var)
        payload = {"texts": list(texts), "src_lang": src_lang, "tgt_lang": tgt_lang}

        def call() -> list[str]:
            body = _post_json(self.url, payload, key, self.timeout)
            translations = body.get("translations")
            if not isinstance(translations, list) or len(translations) != len(texts):
                raise ProviderError("malformed translation response")
            return [str(t) for t in translations]

        return self.retry.run(call)


class HttpEmbeddingProvider:
    """POSTs {"texts"}, expects {"embeddings"} as a list of float lists."""

    def __init__(
        self,
        url: str,
        provider_id: str = "http-embed",
        env_var: str = "EMBED_API_KEY",
        api_key: str | None = None,
        timeout: float = 60.0,
        retry: RetryPolicy | None = None,
    ):
        self.url = url
        self.provider_id = provider_id
        self.env_var = env_var
        self.api_key = api_key
        self.timeout = timeout
        self.retry = retry or RetryPolicy()

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        key = self.api_key or _api_key(self.env_var)
        payload = {"texts": list(texts)}

        def call() -> list[list[float]]:
            body = _post_json(self.url, payload, key, self.timeout)
            embeddings = body.get("embeddings")
            if not isinstance(embeddings, list) or len(embeddings) != len(texts):
                raise ProviderError("malformed embedding response")
            return [[float(x) for x in vec] for vec in embeddings]

        return self.retry.run(call)


class HttpJudgeProvider:
    """POSTs {"prompt"} plus optional {"image"}, expects {"completion"}."""

    def __init__(
        self,
        url: str,
        provider_id: str = "http-judge",
        env_var: str = "JUDGE_API_KEY",
        api_key: str | None = None,
        timeout: float = 120.0,
        retry: RetryPolicy | None = None,
    ):
        self.url = url
        self.provider_id = provider_id
        self.env_var = env_var
        self.api_key = api_key
        self.timeout = timeout
        self.retry = retry or RetryPolicy()

    def complete(self, prompt: str, image: str | None = None) -> str:
        key = self.api_key or _api_key(self.env_var)
        payload: dict[str, Any] = {"prompt": prompt}
        if image is not None:
            payload["image"] = image

        def call() -> str:
            body = _post_json(self.url, payload, key, self.timeout)
            completion = body.get("completion")
            if not isinstance(completion, str):
                raise ProviderError("malformed judge response")
            return completion

        return self.retry.run(call)


def map_batches(
    batches: Sequence[Any],
    fn: Callable[[Any], Any],
    max_in_flight: int = 4,
) -> list[Any]:
    """Apply ``fn`` to batches with a bounded worker pool.

    Results come back in input order regardless of completion order. The
    first failure propagates after in-flight work drains.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be at least 1")
    if not batches:
        return []
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(fn, batches))
