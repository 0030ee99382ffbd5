"""Exception hierarchy shared across the package.

Two branches matter operationally: ``ValidationError`` (bad inputs,
mapped to exit code 2 by the CLI) and ``DivergenceError`` (training
produced non-finite numbers, exit code 3).
"""


class CellscopeError(Exception):
    """Base class for all package errors."""


class ValidationError(CellscopeError):
    """Invalid input data, schema or configuration."""


class EmptyTableError(ValidationError):
    """Table has no rows or no columns."""


class MixedColumnError(ValidationError):
    """Column mixes numeric and non-numeric entries without an override."""


class ConstantColumnError(ValidationError):
    """Numeric column has zero standard deviation."""


class SchemaMismatchError(ValidationError):
    """Table columns do not match the schema the model was fitted with."""


class TypoExhaustedError(ValidationError):
    """Could not synthesize an out-of-vocabulary string within the retry cap."""


class InvalidArchitectureError(ValidationError):
    """Layer widths are asymmetric or inconsistent with the encoded width."""


class ShapeMismatchError(ValidationError):
    """Array shape does not match the expected layout."""


class RankDeficientError(ValidationError):
    """Requested more principal components than nonzero eigenvalues."""


class NoPositivesError(ValidationError):
    """Average precision asked for on labels without a single positive."""


class EMDegenerateError(CellscopeError):
    """Mixture fitting collapsed a component variance below the floor."""


class UnsupportedModelKindError(ValidationError):
    """Operation requires a model kind that does not support it."""


class DatasetMissingError(ValidationError):
    """Experiment references a dataset that is not on disk."""


class DivergenceError(CellscopeError):
    """Training loss became non-finite."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
