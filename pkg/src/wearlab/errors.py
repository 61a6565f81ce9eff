"""Exception hierarchy shared by every wearlab module."""

from __future__ import annotations


class WearlabError(Exception):
    """Base class for all errors raised by wearlab."""

    module = "wearlab"


# ingest

class IngestError(WearlabError):
    module = "ingest"


class SchemaError(IngestError):
    def __init__(self, kind: str, missing: list[str], extra: list[str]) -> None:
        self.kind = kind
        self.missing = list(missing)
        self.extra = list(extra)
        super().__init__(
            f"{kind} header mismatch: missing={self.missing} extra={self.extra}"
        )


class CellParseError(IngestError, ValueError):
    def __init__(self, row: int, column: str, value: str, reason: str = "not numeric") -> None:
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: {value!r} is {reason}")


class DuplicateDateError(IngestError):
    pass


class InvariantViolation(IngestError):
    def __init__(self, rule: str, record: object = None) -> None:
        self.rule = rule
        self.record = record
        super().__init__(f"{rule} violated by {record!r}")


class UnknownItemError(IngestError):
    pass


class OutOfRangeError(WearlabError, ValueError):
    pass


# features

class FeatureError(WearlabError):
    module = "features"


class EmptySeriesError(FeatureError):
    pass


class InsufficientHistoryError(FeatureError):
    pass


class ZeroChronicLoadError(FeatureError, ZeroDivisionError):
    pass


class MissingCohortError(FeatureError):
    pass


class DegenerateBaselineError(FeatureError):
    pass


# prompts

class PromptError(WearlabError):
    module = "prompts"


class UnsupportedKindError(PromptError):
    pass


class MissingDependencyError(PromptError):
    def __init__(self, missing: list[str]) -> None:
        self.missing = list(missing)
        super().__init__(f"missing prior sections: {', '.join(self.missing)}")


class MissingPlaceholderError(PromptError):
    def __init__(self, missing: list[str]) -> None:
        self.missing = list(missing)
        super().__init__(f"unresolved placeholders: {', '.join(self.missing)}")


class TooManyExemplarsError(PromptError):
    pass


class OptionCountError(PromptError):
    pass


class TransportError(PromptError):
    """Network-level failure talking to the LLM service (retryable)."""


class ProtocolError(PromptError):
    """The LLM service (or the caller) broke the request/response contract."""


# pro

class ProError(WearlabError):
    module = "pro"


class InsufficientDataError(ProError):
    pass


class DegenerateFeatureError(ProError):
    pass


class EmptyDatasetError(ProError):
    pass


# models

class ModelError(WearlabError):
    module = "models"


class SingleClassError(WearlabError):
    pass


class NonConvergenceError(ModelError):
    pass


class DimensionError(ModelError, ValueError):
    pass


class DivergenceError(ModelError):
    pass


class ConvergenceWarning(UserWarning):
    pass


# stats

class StatsError(WearlabError):
    module = "stats"


class NoPositiveError(StatsError):
    pass


class EmptyDataError(StatsError):
    pass


class ResampleExhaustionError(StatsError):
    pass


class EmptySampleError(StatsError):
    pass


class InsufficientPairsError(StatsError):
    pass


class DegenerateVarianceError(StatsError):
    pass
