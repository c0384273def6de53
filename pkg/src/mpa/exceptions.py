"""Engine error hierarchy.

Every error carries the process exit code used by the CLI:
2 usage, 3 data/format, 4 provider, 5 numerical.
"""

from __future__ import annotations


class MpaError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class DataError(MpaError):
    exit_code = 3


class ProviderError(MpaError):
    exit_code = 4


class NumericalError(MpaError):
    exit_code = 5


# -- data / format ----------------------------------------------------------

class FormatError(DataError):
    """Bank or manifest bytes do not match the documented layout."""


class BankIoError(DataError):
    """Underlying I/O failure while reading or writing a bank."""


class DuplicateRecordError(DataError):
    """Two records share the same (class_id, item_id, view_id, modality) key."""


class DimMismatchError(DataError):
    """Vectors of different dimensionality were mixed."""


class EmptyClassError(DataError):
    """A class has no member features where at least one is required."""


class EmptyClassNameError(DataError):
    """A class name is empty after trimming."""


class CropTooLargeError(DataError):
    """Requested crop size exceeds the image bounds."""


class LabelRangeError(DataError):
    """A training label falls outside [0, n_classes)."""


class TooFewClassesError(DataError):
    """Fewer than two classes where pairwise structure is required."""


class InsufficientDataError(DataError):
    """The bank cannot supply the requested episode layout."""


class MissingModalityError(DataError):
    """A pipeline flag needs records of a modality the bank does not contain."""


# -- provider ----------------------------------------------------------------

class ProviderUnavailable(ProviderError):
    """The provider could not be reached within the retry budget."""


class ProviderContractViolation(ProviderError):
    """The provider answered, but the response breaks the wire contract."""


# -- numerical ---------------------------------------------------------------

class ZeroNormVectorError(NumericalError):
    """A zero-norm vector reached an operation that needs a direction."""


class NumericalDivergenceError(NumericalError):
    """The optimizer produced a non-finite loss or gradient."""
