"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Scenario or run configuration failed validation."""


class ScheduleError(ConfigError):
    """A response-time matrix row is malformed (names joint and column)."""

    def __init__(self, message, joint=None, column=None):
        super().__init__(message)
        self.joint = joint
        self.column = column


class IntegrationError(RuntimeError):
    """Integration aborted; carries the time at which it failed."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InfeasibleSegmentError(RuntimeError):
    """Boundary pair unreachable under the control bound in the horizon."""


class ConvergenceError(RuntimeError):
    """Segment NLP hit the iteration cap; carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PlanningError(RuntimeError):
    """Every candidate schedule evaluated infeasible."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
