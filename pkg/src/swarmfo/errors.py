"""Exception hierarchy shared by all swarmfo modules."""


class SwarmError(Exception):
    """Base class for all package errors."""


class SpecError(SwarmError, ValueError):
    """A formation specification violates one of its invariants."""


class MalformedIncidence(SpecError):
    pass


class DisconnectedGraph(SpecError):
    pass


class UnrealizableDisplacements(SpecError):
    pass


class DimensionMismatch(SwarmError, ValueError):
    pass


class NonpositiveInput(SwarmError, ValueError):
    pass


class MissingNeighborMessage(SwarmError, LookupError):
    pass


class SingularSystem(SwarmError, ArithmeticError):
    pass


class UnstableStep(SwarmError, ArithmeticError):
    """Raised when integration produces a non-finite state component."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class ParseError(SwarmError, ValueError):
    pass


class ValidationError(SwarmError, ValueError):
    """Scenario file content violates an invariant; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
