"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: UsageError -> 1,
DataError -> 2, NetworkError -> 3.
"""


class MapsmithError(Exception):
    """Base class for all toolkit errors."""


class UsageError(MapsmithError):
    """Bad flags, bad argument combinations, missing configuration."""


class DataError(MapsmithError):
    """Malformed or out-of-contract data (files, grids, records)."""


class NetworkError(MapsmithError):
    """A remote endpoint failed after the configured retries."""


class LabelFormatError(DataError):
    """An LLM response that never converged to a valid description set.

    Carries the raw response text so callers can log or inspect it.
    """

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response
