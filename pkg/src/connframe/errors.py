"""Exception hierarchy shared by all modules.

The CLI maps any ConnframeError to exit code 2 (data error); everything
else is a bug and propagates.
"""


class ConnframeError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(ConnframeError):
    """Malformed input text: unknown token, bad column count, bad number."""


class DataError(ConnframeError):
    """Well-formed input that violates a data precondition (empty training
    set, no co-annotated items, verb-set mismatch, zero-norm vector, ...)."""


class VocabularyError(ConnframeError, KeyError):
    """A token is absent from the embedding vocabulary."""

    def __str__(self):
        # KeyError repr()s its argument; keep the plain message readable.
        return Exception.__str__(self)


class GraphStructureError(ConnframeError):
    """A factor graph has the wrong shape for the requested operation
    (cycle where a tree is required, state space beyond the guard)."""
