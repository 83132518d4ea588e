"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: usage problems exit 1,
data/format problems exit 2, numeric failures and threshold violations
exit 3.
"""


class ShapeError(ValueError):
    """Operand shapes are inconsistent for the requested operation."""


class ContractError(ValueError):
    """A documented precondition was violated (empty batch, short series, ...)."""


class FormatError(ValueError):
    """A file does not match its documented binary/CSV layout."""


class DataError(ValueError):
    """A file parses but carries semantically invalid content (e.g. label > 9)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values.

    ``where`` carries the integration time at which the failure occurred,
    when known.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class StepBudgetError(NumericError):
    """The adaptive solver exhausted its step budget before reaching t1.

    ``where`` reports the time reached when the budget ran out.
    """
