"""Exception hierarchy shared across the pipeline stages."""


class SeqFusionError(Exception):
    """Base class for all package errors."""


class DataError(SeqFusionError, ValueError):
    """Malformed or inconsistent dataset content."""


class BackendError(SeqFusionError):
    """An LLM backend could not produce a response."""
