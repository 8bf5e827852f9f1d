"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures without a lookup table: 2 for malformed input, 3 for domain errors
(the mathematics refuses the request).
"""


class PcatError(Exception):
    exit_code = 1


class InputError(PcatError):
    exit_code = 2


class DomainError(PcatError):
    exit_code = 3


class ParseError(InputError):
    pass


class DimensionMismatch(InputError, ValueError):
    pass


class TimeOutOfRange(InputError, ValueError):
    pass


class NonDiagonalizable(DomainError):
    pass


class Singular(DomainError):
    pass


class EmptySubset(DomainError):
    pass


class VanishingDenominator(DomainError):
    pass


class VanishingTrace(DomainError):
    pass


class ApproximationFailure(DomainError):
    pass


class EmptyWithinBounds(DomainError):
    pass


class PositiveBmax(DomainError):
    pass
