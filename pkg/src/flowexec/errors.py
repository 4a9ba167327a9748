"""Exception types shared across the package.

Domain errors (bad arguments, out-of-range queries) raise plain ValueError;
the classes below mark failures of a numerical procedure or of input data,
so callers (and the CLI) can map them to distinct exit paths.
"""


class FlowexecError(Exception):
    """Base class for package-specific failures."""


class SolverError(FlowexecError):
    """A numerical solver broke down (blow-up, negative radicand, ...)."""


class SimulationError(FlowexecError):
    """A Monte Carlo run produced a non-finite value or failed to terminate."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SearchError(FlowexecError):
    """A horizon search found no admissible answer (e.g. monotone cost)."""


class DataError(FlowexecError):
    """Malformed input data; carries the offending record location."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
