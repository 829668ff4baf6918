"""Exception types shared across the toolkit."""

from __future__ import annotations


class MmcurateError(Exception):
    """Base class for all toolkit errors."""


class RecordParseError(MmcurateError):
    """A line in a record file could not be parsed. Carries a 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class RecordValidationError(MmcurateError):
    """A record violates a schema invariant. Carries the record id when known."""

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


class StatsError(MmcurateError):
    """Before/after record sources are inconsistent."""


class ProviderError(MmcurateError):
    """A translation/embedding/judge provider call failed."""


class RateLimitedError(ProviderError):
    """Provider asked us to back off; ``retry_after`` is a hint in seconds."""

    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class JudgmentParseError(MmcurateError):
    """A judge response could not be turned into a valid set of scores."""


class GenerationError(MmcurateError):
    """Benchmark generation failed for a source after exhausting retries."""


class ManifestError(MmcurateError):
    """Invalid training-manifest request or inconsistent architecture spec."""


class CampaignError(MmcurateError):
    """Invalid campaign configuration or annotation submission."""
