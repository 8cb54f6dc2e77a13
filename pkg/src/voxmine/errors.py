"""Exception types shared across the pipeline.

Exit-code mapping used by the CLI: usage errors -> 1, DataError -> 2,
ProviderError -> 3.
"""


class VoxmineError(Exception):
    """Base class for all voxmine errors."""


class DataError(VoxmineError):
    """Malformed, inconsistent or missing input data."""


class DumpFormatError(DataError):
    """Dump container is not well-formed; carries the approximate byte offset."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class TruncatedDumpError(DumpFormatError):
    """Dump stream ended mid-page; pages yielded before the error are complete."""


class ProviderError(VoxmineError):
    """Search provider failed after retries; carries the failing phrase."""

    def __init__(self, message: str, phrase: str | None = None):
        super().__init__(message)
        self.phrase = phrase


class AuthError(VoxmineError):
    """Invalid or missing credentials for the validation service."""


class ConflictError(VoxmineError):
    """Duplicate label submission for the same (segment, annotator)."""


class NotFoundError(VoxmineError):
    """Requested entity (language, session, segment) does not exist."""
