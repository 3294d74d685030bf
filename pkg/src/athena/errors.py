"""Exception hierarchy shared across the compiler."""


class AthenaError(Exception):
    """Base class for all compiler errors."""


class CircuitSyntaxError(AthenaError):
    """Raised when a circuit source cannot be parsed.

    Carries the 1-based line/column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class ConfigError(AthenaError):
    """Invalid topology / timing / suite configuration."""


class InfeasibleError(AthenaError):
    """A mapping or partitioning request cannot be satisfied."""


class DeadlockError(AthenaError):
    """No teleportation plan exists and no qubit can be evicted.

    Cannot occur when every chip has at least one communication qubit and
    blocks passed formation-time feasibility; surfacing it loudly is a bug
    guard, not a recoverable condition.
    """

    def __init__(self, chip, message=""):
        self.chip = chip
        super().__init__(message or f"EPR capacity deadlock on chip {chip}")
