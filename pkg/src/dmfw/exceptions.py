"""Exception hierarchy shared by all dmfw modules."""


class DMFWError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(DMFWError, ValueError):
    """A topology, gossip matrix or stream could not be built as requested."""


class NumericError(DMFWError, ArithmeticError):
    """Non-finite input or a numerical routine failed to converge."""


class ConfigError(DMFWError, ValueError):
    """Invalid run configuration.

    ``line`` is the 1-based line in the config file when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg


class InvariantViolation(DMFWError, RuntimeError):
    """A runtime invariant of the simulation was broken; the run is aborted."""
