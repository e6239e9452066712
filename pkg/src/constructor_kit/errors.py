"""Exception types raised across the workbench."""


class ConstructorKitError(Exception):
    """Base class for all workbench errors."""


class ValidationError(ConstructorKitError):
    """A value violates one of its structural invariants.

    ``invariant`` names the violated rule (e.g. ``"Norm"``, ``"UnresolvedName"``).
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ParseError(ConstructorKitError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class OverlappingOutputs(ConstructorKitError):
    pass


class SharedSubstrate(ConstructorKitError):
    pass


class InterfaceMismatch(ConstructorKitError):
    def __init__(self, message: str, edge=None):
        super().__init__(message)
        self.edge = edge


class CycleDetected(ConstructorKitError):
    pass


class BadPartition(ConstructorKitError):
    pass


class KindMismatch(ConstructorKitError):
    pass


class DimensionMismatch(ConstructorKitError):
    pass


class NotPreparable(ConstructorKitError):
    pass


class LabelMismatch(ConstructorKitError):
    pass


class TooFewAttributes(ConstructorKitError):
    pass


class PreconditionFailed(ConstructorKitError):
    pass


class NoFixedPointFreePermutation(PreconditionFailed):
    pass


class TheoremViolation(ConstructorKitError):
    """A model contradicts a result the theory proves; carries the offending verdict."""

    def __init__(self, message: str, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class BudgetExceeded(ConstructorKitError):
    def __init__(self, message: str, coverage: int = 0):
        super().__init__(message)
        self.coverage = coverage
