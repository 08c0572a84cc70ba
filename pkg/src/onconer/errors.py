"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all recoverable pipeline failures.

    The CLI maps any PipelineError to exit code 1.
    """


class FormatError(PipelineError):
    """An input stream does not conform to its declared file format."""


class DataError(PipelineError):
    """Well-formed input that violates an invariant (bounds, overlaps, sums)."""


class AlignmentError(DataError):
    """Predictions and gold sequences cannot be aligned document by document."""


class DictionaryError(FormatError):
    """Invalid gazetteer dictionary row."""


class InterchangeError(FormatError):
    """Invalid prediction interchange record."""
