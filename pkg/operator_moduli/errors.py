"""Exception hierarchy shared by every module.

Divergent quantities (+inf bounds, missing certificates) are ordinary values and never
raise; these classes are reserved for bad input, violated hypotheses and failed rechecks.
"""
from typing import Any


class OperatorModuliError(Exception):
    "Base class for all errors raised by this package."


class ArgumentError(OperatorModuliError, ValueError):
    "Bad shapes, empty inputs or parameters outside their admissible range."


class DegenerateInputError(ArgumentError):
    "Input for which the requested ratio has a vanishing denominator (e.g. constant f)."


class DomainError(ArgumentError):
    """A function was evaluated outside its declared domain.

    Attributes:
        point: the first offending point.
    """

    def __init__(self, message: str, point: complex | None = None) -> None:
        super().__init__(message)
        self.point = point


class ValidationError(OperatorModuliError):
    """Data failed a structural invariant (unitarity, class membership, recomputed value).

    Attributes:
        defect: size of the violation, when it is measurable.
    """

    def __init__(self, message: str, defect: float | None = None) -> None:
        super().__init__(message)
        self.defect = defect


class PreconditionError(OperatorModuliError):
    """A mathematical hypothesis of an estimate does not hold for the given data.

    Attributes:
        offending: the data witnessing the violation (e.g. a pair of points).
    """

    def __init__(self, message: str, offending: Any = None) -> None:
        super().__init__(message)
        self.offending = offending


class ConsistencyError(OperatorModuliError):
    "An internal recheck failed. Indicates a bug rather than bad input."
