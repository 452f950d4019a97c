"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all claimtree errors."""


class DocumentError(EngineError, ValueError):
    """A serialized document or source file is malformed; the message names the offending field."""


class ResponseFormatError(EngineError, ValueError):
    """A model response does not match the expected enumerated format (prompt drift)."""


class BackendError(EngineError):
    """A backend call failed."""

    retryable = False


class TransportError(BackendError):
    """Network-level failure talking to a remote backend; safe to retry."""

    retryable = True


class MockScriptMiss(BackendError):
    """A scripted mock backend received a prompt that is not in its script.

    This signals a gap in a test fixture, not a runtime condition.
    """
