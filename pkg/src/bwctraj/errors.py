"""Exception hierarchy.

Errors fall in three families that the command line maps to exit codes:
configuration mistakes, bad input data, and broken internal invariants.
"""


class BWCError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BWCError, ValueError):
    """Invalid or missing algorithm parameter."""


class DataError(BWCError, ValueError):
    """Input data violates a precondition."""


class InvalidSegmentError(DataError):
    """Degenerate or mis-ordered segment given to the geometry kernel."""


class OutOfRangeError(DataError):
    """Requested time lies outside a sequence's time span."""


class EmptyInputError(DataError):
    pass


class OrderingError(DataError):
    """Stream or trajectory is not time ordered."""


class SchemaError(DataError):
    """A required field (column, sog/cog) is missing."""


class IntegrityError(DataError):
    """Duplicate timestamps, or a sample that is not a subsequence of its source."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class HistoryGapError(DataError):
    """Raw history does not cover the span needed to score a point."""


class DegenerateSpanError(DataError):
    pass


class QueueError(BWCError):
    pass


class DuplicateEntryError(QueueError, KeyError):
    pass


class MissingEntryError(QueueError, KeyError):
    pass


class EmptyQueueError(QueueError, IndexError):
    pass


class InvariantError(BWCError, AssertionError):
    """An internal guarantee (capacity, bandwidth cap) was broken."""
