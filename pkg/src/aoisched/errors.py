"""Exception hierarchy shared by all modules."""


class AoISchedError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AoISchedError, ValueError):
    """Invalid user-supplied configuration (maps to CLI exit code 2)."""


class NotStochastic(ConfigError):
    pass


class NotErgodic(ConfigError):
    pass


class NegativeEntry(ConfigError):
    pass


class IndexOutOfRange(AoISchedError, IndexError):
    pass


class SingularSystem(AoISchedError):
    pass


class DimensionMismatch(ConfigError):
    pass


class IterationLimit(AoISchedError):
    pass


class NumericalFailure(AoISchedError):
    pass


class InvalidTruncation(ConfigError):
    pass


class InfeasiblePower(AoISchedError):
    """Power budget too small to support the forced boundary transmissions.

    ``sensor`` carries the offending sensor index when raised from the
    network-level search.
    """

    def __init__(self, message, sensor=None):
        super().__init__(message)
        self.sensor = sensor


class TruncationTooTight(AoISchedError):
    pass


class NoConvergence(AoISchedError):
    pass


class NoBracket(AoISchedError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
