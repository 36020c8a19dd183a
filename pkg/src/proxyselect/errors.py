"""Exception types shared across the package."""


class SelectionError(Exception):
    """Base class for all package-specific errors."""


class NoPositives(SelectionError):
    """Ground truth contains no positive records."""


class NoPositiveSamples(SelectionError):
    """A labeled sample carries no positive mass at any threshold."""


class EmptySelection(SelectionError):
    """No sampled record scores at or above the requested threshold."""


class BudgetExhausted(SelectionError):
    """A fresh oracle call was requested after the call budget ran out."""


class InvalidCounts(SelectionError):
    """Success/trial counts are inconsistent or values are not binary."""


class EmptyReports(SelectionError):
    """An aggregate was requested over zero trial reports."""


class DatasetFormatError(SelectionError):
    """A dataset file failed validation; the message carries the line number."""


class ConfigError(SelectionError):
    """A query or experiment configuration document is invalid."""
