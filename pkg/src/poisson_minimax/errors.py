"""Exception hierarchy shared by the solver modules."""


class MinimaxError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MinimaxError, ValueError):
    """Invalid parameters or configuration.

    ``field`` names the offending setting when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class PreconditionError(MinimaxError, ValueError):
    """An operation was called outside its domain."""


class SolverError(MinimaxError, RuntimeError):
    """A numerical routine failed (non-convergence, degenerate output, ...)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class UndecidedError(MinimaxError):
    """An event stream ended before the test reached a boundary."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state
