"""Exception hierarchy shared by all modules."""


class IneqLabError(Exception):
    """Base class for library errors."""


class InvalidParameter(IneqLabError, ValueError):
    pass


class DegenerateInput(IneqLabError, ValueError):
    pass


class ResolutionError(IneqLabError):
    """A function carries more spectral content than the grid resolves."""


class DomainError(IneqLabError, ValueError):
    pass


class IntegrationError(IneqLabError, RuntimeError):
    pass


class StiffnessError(IntegrationError):
    pass


class FlowError(IneqLabError, RuntimeError):
    """Positivity loss during a flow; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class PreconditionError(IneqLabError, ValueError):
    pass


class IntegrabilityError(IneqLabError, ValueError):
    pass


class UndefinedQuotient(IneqLabError, ZeroDivisionError):
    pass


class EmptySample(IneqLabError, ValueError):
    pass


class ConfigError(IneqLabError, ValueError):
    pass
