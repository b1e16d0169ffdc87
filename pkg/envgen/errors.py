class EnvGenError(Exception):
    """Base class for all errors raised by envgen"""


class DimensionError(EnvGenError, ValueError):
    pass


class DomainError(EnvGenError, ValueError):
    pass


class ChannelMismatchError(EnvGenError, ValueError):
    pass


class SeedSizeError(EnvGenError, ValueError):
    pass


class FormatError(EnvGenError, ValueError):
    pass


class ConfigError(EnvGenError, ValueError):
    pass


class InfeasibleRepairError(EnvGenError):
    """Domain constraints cannot be met for this grid (e.g. more shelves than storage cells)"""


class RepairBudgetExhausted(EnvGenError):
    """Repair ran out of work units (or wall-clock time) before reaching a valid environment"""


class NumericalFailure(EnvGenError, ArithmeticError):
    pass


class InvalidEnvironmentError(EnvGenError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TooManyAgentsError(EnvGenError, ValueError):
    pass


class NoCandidateGoalError(EnvGenError):
    pass


class DegenerateMazeError(EnvGenError, ValueError):
    pass


class EmptySelectionError(EnvGenError, LookupError):
    pass
