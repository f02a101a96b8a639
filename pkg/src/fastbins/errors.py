"""Exception types raised by fastbins."""


class ParameterError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class EmptyStateError(ValueError):
    """The operation needs a ball to act on but the state holds none."""


class CapacityError(ValueError):
    """An exact enumeration was requested beyond its size cap."""


class InvariantError(RuntimeError):
    """An internal consistency check failed.  This signals a bug."""
