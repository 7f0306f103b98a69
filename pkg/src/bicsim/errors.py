"""Exception hierarchy for the simulator."""


class BicsimError(Exception):
    """Base class for all simulator errors."""


class ValidationError(BicsimError, ValueError):
    """Invalid input data (scenario file, parameters, graph)."""


class DegenerateMachineError(BicsimError):
    """Stator equations are singular for the given machine constants."""


class NetworkSingularError(BicsimError):
    """The augmented network equations could not be solved."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ProtocolViolation(BicsimError):
    """A controller received data from a unit that is not its graph neighbour."""


class InitializationError(BicsimError):
    """Power flow or generator back-solve failed."""


class InfeasibleDispatchError(InitializationError):
    pass


class IntegrationDiverged(BicsimError):
    """Non-finite state encountered during time stepping."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} at t={time:.6f} s"
        super().__init__(message)
        self.time = time


class BoundViolation(BicsimError):
    """A controller state left its admissible interval by more than the clamp tolerance."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} at t={time:.6f} s"
        super().__init__(message)
        self.time = time
