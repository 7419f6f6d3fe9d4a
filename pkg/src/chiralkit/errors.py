"""Exception types raised across chiralkit."""


class ChiralkitError(Exception):
    """Base class for all library errors."""


class ContractViolation(ChiralkitError, ValueError):
    """An operation was called outside its documented domain."""


class NotClosed(ChiralkitError):
    """A form expected to be closed has nonzero exterior derivative."""


class NotHarmonic(ChiralkitError):
    """A function expected to be Euclidean-harmonic has nonzero Laplacian."""


class NonCriticalOrigin(ChiralkitError):
    """The gradient of a germ does not vanish at the origin."""


class ZeroOnSphere(ChiralkitError):
    """A field vanishes (numerically) on a sampling sphere."""


class NonIntegralDegree(ChiralkitError):
    """Degree quadrature did not settle near an integer."""


class IndefiniteDefect(ChiralkitError):
    """The contact defect changes sign, so no Reeb-like orientation exists."""


class WrongSign(ChiralkitError):
    """alpha ^ beta is negative at the requested point."""


class NonRegularValue(ChiralkitError):
    """The requested level is not a regular value on the extracted mesh."""


class TransversalityFailure(ChiralkitError):
    """Surface construction inputs fail the positivity requirement."""


class ParseError(ChiralkitError, ValueError):
    """Malformed inline polynomial or form input."""

    def __init__(self, message: str, text: str = "", pos: int = 0):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.column = col
