"""Exception types shared across the package."""


class ArenaError(Exception):
    """Base class for all package-specific errors."""


class InvalidInstanceError(ArenaError):
    """Malformed instance data: bad shapes, negative values, non-positive targets."""


class AmbiguousOutcomeError(ArenaError):
    """An auction round whose outcome is undefined (e.g. all bids zero in a
    two-bidder randomized auction).  Simulation layers catch this and treat
    the query as unallocated."""


class OraclePreconditionError(ArenaError):
    """A numeric oracle was handed inputs violating its contract
    (e.g. a non-monotone win-probability curve)."""


class NumericError(ArenaError):
    """A solver failed to converge; the message carries diagnostics."""
