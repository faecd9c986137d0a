"""Errors raised by the simulator, its oracles and the harness."""


class SimulationError(Exception):
    """Base class for every error the scheduling app raises on purpose."""


class ConfigurationError(SimulationError):
    """An environment, adversary, schedule, job spec or bound parameter set is invalid."""


class PackingError(SimulationError):
    """A triangle cannot be packed with the given machines or jobs."""


class ProtocolViolation(SimulationError):
    """The channel carried a message no machine was scheduled to send."""


class AdversaryViolation(SimulationError):
    """An adversary exceeded its budget or crashed a machine that was not running."""


class IncompleteTrace(SimulationError):
    """A trace still has machines without a terminal event."""


class InstanceTooLarge(SimulationError):
    """The exhaustive oracle hit its node cap."""


class RoundLimitExceeded(SimulationError):
    """A run did not terminate within its round limit; this signals a scheduling bug."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
