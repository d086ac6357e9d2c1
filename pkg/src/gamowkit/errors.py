"""Exception hierarchy shared by the numerical modules and the CLI."""


class GamowkitError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GamowkitError, ValueError):
    """Input violates a documented domain restriction."""


class NumericalError(GamowkitError, ArithmeticError):
    """A numerical procedure failed (overflow, non-convergence, ...)."""


class SingularMatrixError(NumericalError):
    """The least-squares normal matrix could not be inverted."""


class DataFormatError(ValidationError):
    """A data file could not be parsed.

    ``line`` holds the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
