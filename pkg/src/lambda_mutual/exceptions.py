"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class LambdaMutualError(Exception):
    exit_code = 1


class ConfigError(LambdaMutualError, ValueError):
    exit_code = 1


class DomainError(LambdaMutualError, ValueError):
    """Argument outside the mathematical domain of a map (c <= 0, lambda <= 0, ...)."""

    exit_code = 2


class RangeError(DomainError):
    """Value outside the range of u, so no inverse exists."""


class ContractionError(DomainError):
    """Linear operator with norm >= 1 handed to the Neumann solver."""


class MechanismInfeasibleError(LambdaMutualError):
    """A continuation value left the range of vbar1."""

    exit_code = 3

    def __init__(self, message, state=None, value=None):
        super().__init__(message)
        self.state = state
        self.value = value


class ConvergenceError(LambdaMutualError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StatisticsError(LambdaMutualError, ValueError):
    """Cross-section with no surviving agents."""

    exit_code = 2
