class FormatError(ValueError):
    """A file does not follow the expected layout (missing columns, bad magic)."""


class DataError(ValueError):
    """A file parses but carries invalid values (NaN fields, bad indices)."""


class ValidationError(ValueError):
    """An in-memory object violates its invariants or preconditions."""


class NumericError(RuntimeError):
    """A numeric routine produced non-finite values."""
