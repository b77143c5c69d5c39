"""Exception hierarchy shared by all corrdet modules."""


class CorrdetError(Exception):
    """Base class for every error raised by corrdet."""


class InvalidParameter(CorrdetError, ValueError):
    """A distribution, population or generator parameter is out of range."""


class InvalidInputs(CorrdetError, ValueError):
    """Inputs violate a documented precondition."""


class ShapeMismatch(CorrdetError, ValueError):
    pass


class ConfigError(CorrdetError, ValueError):
    """An experiment configuration is malformed."""


class NumericalError(CorrdetError, ArithmeticError):
    """Base class for failures of a numerical kernel."""


class NotPositiveDefinite(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NonPositiveVariance(NumericalError):
    pass


class InfiniteKurtosisWithoutPivotality(InvalidInputs):
    """Infinite fourth moment combined with a population other than identity."""


class DegenerateRow(NumericalError):
    def __init__(self, row: int):
        super().__init__(f"row {row} has zero (centered) sum of squares")
        self.row = row


class NumericalBreakdown(NumericalError):
    pass


class MissingNu6(InvalidInputs):
    pass


class DomainError(CorrdetError, ValueError):
    pass
