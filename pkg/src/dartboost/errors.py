"""Exception types raised across the library.

Every failure the library anticipates is one of these; the CLI maps them
onto exit codes (see ``dartboost.cli``).
"""


class DartboostError(Exception):
    """Base class for all library errors."""


class ConfigError(DartboostError, ValueError):
    """Invalid or mutually inconsistent configuration."""


class DataFormatError(DartboostError, ValueError):
    """A data file could not be parsed or violates a dataset invariant."""

    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class LabelDomainError(DartboostError, ValueError):
    """Labels are outside the domain required by the chosen loss."""


class FeatureMismatchError(DartboostError, ValueError):
    """Feature counts of a model and a row/dataset disagree."""

    def __init__(self, expected, got):
        super().__init__(f"feature count mismatch: model has {expected}, data has {got}")
        self.expected = expected
        self.got = got


class ModelFormatError(DartboostError, ValueError):
    """A model file is malformed or violates an ensemble invariant."""


class SchemaVersionError(ModelFormatError):
    def __init__(self, found, supported):
        super().__init__(f"unsupported schema_version {found!r} (supported: {supported})")
        self.found = found
        self.supported = supported


class CoverageError(DartboostError, ValueError):
    """A tree lacks the training-coverage annotations needed for rendering."""
