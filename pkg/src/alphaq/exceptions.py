"""Error hierarchy shared by every alphaq module."""


class AlphaQError(Exception):
    """Base class for all errors raised by alphaq."""


class DataError(AlphaQError, ValueError):
    """Input data cannot be used as given."""


class DimensionMismatch(DataError):
    pass


class SingularDesign(DataError):
    pass


class DegenerateIntercept(DataError):
    pass


class ZeroResidualVariance(DataError):
    pass


class MomentUndefined(AlphaQError, ValueError):
    pass


class Nonconvergent(AlphaQError, ArithmeticError):
    pass


class HypergeometricOverflow(AlphaQError, OverflowError):
    pass


class DomainError(AlphaQError, ValueError):
    pass


class InvalidCorrelation(DataError):
    pass


class NonpositiveVariance(AlphaQError, ArithmeticError):
    pass


class TooFewAssets(DataError):
    pass


class EmptyInput(AlphaQError, ValueError):
    pass


class SingularSAR(AlphaQError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class MissingColumn(DataError):
    pass


class CalendarMismatch(DataError):
    pass


class NoEvaluableWindows(DataError):
    pass
