"""Exception hierarchy shared across the package.

Everything user-facing derives from VelostatError so the CLI can map
library failures onto exit code 1 in one place.
"""


class VelostatError(Exception):
    """Base class for all velostat validation and data errors."""


class FeedParseError(VelostatError):
    """The feed document as a whole could not be parsed."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class FeedAuthError(VelostatError):
    """The feed rejected the API key; retrying is pointless."""


class FeedUnavailableError(VelostatError):
    """The feed failed for too many consecutive poll cycles."""


class ConfigError(VelostatError):
    """A configuration or scenario file is malformed."""


class UnknownStationError(VelostatError):
    """The requested station does not appear in the archive."""


class EmptyProfileError(VelostatError):
    """No snapshots exist for the requested station and date."""


class InsufficientDataError(VelostatError):
    """A profile does not carry enough observed slots for the operation."""


class InfeasibleError(VelostatError):
    """The clustering instance cannot be solved as posed (e.g. k > n)."""


class ShapeMismatchError(VelostatError):
    """Vector lengths or aligned sequences do not agree."""


class EmptyResultError(VelostatError):
    """A query or aggregation has nothing to operate on."""
