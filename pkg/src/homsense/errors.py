"""Exception hierarchy shared by all modules."""


class HomsenseError(Exception):
    """Base class for all errors raised by the package."""


class InputError(HomsenseError, ValueError):
    """Malformed input: non-finite entries, mismatched dimensions, bad specs."""


class DomainError(HomsenseError, ValueError):
    """A value outside the domain of an operation (zero vector, trivial subspace)."""


class FamilySizeError(HomsenseError):
    """A map family (or pair set) exceeds the enumeration cap."""

    def __init__(self, cardinality, cap):
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(f"family has {cardinality} members, cap is {cap}")


class UnsupportedMapError(HomsenseError):
    """An operation that needs structured maps received an explicit matrix."""


class NotApplicableError(HomsenseError):
    """A construction whose dimension hypothesis is absent from the trace."""


class PreconditionError(HomsenseError):
    """Hypotheses of a witness construction are violated."""

    def __init__(self, reason, **details):
        self.reason = reason
        self.details = details
        super().__init__(reason)


class ConstructionError(HomsenseError):
    """A randomized construction exhausted its retry budget."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class NumericalInstabilityError(HomsenseError):
    """An iteration failed to stabilize within its level budget."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)
