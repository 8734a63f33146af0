"""Exception hierarchy shared across the package."""

from __future__ import annotations

from typing import Any


class UtterflipError(Exception):
    """Base class for all errors raised by this package."""


class EmptyUtteranceError(UtterflipError):
    """No word tokens remain after normalization."""


class LexiconFormatError(UtterflipError):
    """A lexicon file contains a malformed line."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class MissingAttributesError(UtterflipError):
    """An object passed to the builtin listener carries no attribute weights."""


class ZeroVectorError(UtterflipError):
    """An embedding has zero norm, so cosine similarity is undefined."""


class OracleUnavailableError(UtterflipError):
    """A remote oracle kept failing after all retries.

    ``payload`` holds the last raw response (or error text) for diagnostics.
    """

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


class MalformedResponseError(UtterflipError):
    """A remote oracle answered with a schema-violating payload."""

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


class NoProposalsError(UtterflipError):
    """Nothing parseable remained in a word proposer's response."""


class EmptyPoolError(UtterflipError):
    """A sampling strategy produced no candidate replacement words."""


class NoMutablePositionsError(UtterflipError):
    """The utterance contains no content-word positions to mutate."""


class InsufficientDiversityError(UtterflipError):
    """Could not sample the requested number of distinct candidates."""

    def __init__(self, requested: int, found: int, attempts: int):
        super().__init__(
            f"only {found} of {requested} distinct candidates after {attempts} attempts"
        )
        self.requested = requested
        self.found = found
        self.attempts = attempts


class NotMisclassifiedError(UtterflipError):
    """The listener already prefers the target, so there is nothing to explain."""


class DatasetParseError(UtterflipError):
    """A dataset line is not a valid sample record."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class DuplicateSampleIdError(UtterflipError):
    """Two dataset records share a sample id."""


class EmptyInputError(UtterflipError):
    """An aggregation was asked to summarize zero samples."""


class ConfigError(UtterflipError):
    """The run configuration is unusable."""
