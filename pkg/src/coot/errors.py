"""Exception hierarchy shared by every module in the package."""


class CootError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CootError):
    """Array arguments have incompatible or invalid shapes."""


class ConfigError(CootError):
    """A configuration file or dictionary is malformed or inconsistent."""


class AssumptionError(CootError):
    """A standing assumption on the problem data is violated."""


class RankConditionError(CootError):
    """Collected data is not exciting enough for a unique regression solve.

    Carries the achieved and required ranks so callers can report how far
    the data fell short.
    """

    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


class StabilityError(CootError):
    """A gain that must be stabilizing is not."""


class DivergenceError(CootError):
    """A simulated trajectory left the configured magnitude bound."""


class SearchError(CootError):
    """An initialization search exhausted its candidate sequence."""


class ConvergenceError(CootError):
    """An iterative solve hit its iteration cap before meeting tolerance."""
