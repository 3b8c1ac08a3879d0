"""Exception types shared across the package."""


class RgqdaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RgqdaError):
    """Vector/matrix shapes do not agree."""


class NotPositiveDefinite(RgqdaError):
    """A matrix required to be SPD has a pivot at or below tolerance."""


class TooFewObservations(RgqdaError):
    """Not enough rows to fit the requested estimator."""


class DegenerateData(RgqdaError):
    """Data leads to a singular scatter estimate (or an empty fit)."""


class EmptyDataset(RgqdaError):
    """An operation received a dataset with no rows."""


class UnsupportedDesign(RgqdaError):
    """Automatic contamination recipe does not cover this class structure."""


class ParseError(RgqdaError):
    """A CSV cell could not be parsed; carries row and column context."""

    def __init__(self, row: int, column: str, message: str):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column


class MissingColumn(RgqdaError):
    """A named column is absent from the CSV header."""


class ClassTooSmall(RgqdaError):
    """A class has too few rows for the requested split."""


class ConfigError(RgqdaError):
    """An experiment config document is invalid; carries the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
