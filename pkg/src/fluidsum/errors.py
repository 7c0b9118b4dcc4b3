"""Exception hierarchy shared by every fluidsum module."""


class FluidError(Exception):
    """Base class for all fluidsum errors."""


class NotFoundError(FluidError, KeyError):
    """A vertex, edge, summary hash or link does not exist."""

    def __str__(self):
        # KeyError quotes its argument; keep messages readable
        return Exception.__str__(self)


class IntegrityError(FluidError):
    """A structural invariant would be violated (dangling edge, payload underflow,
    inconsistent VHI/SG pair, corrupt persisted file, ...)."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at byte {position})")
        self.position = position


class ConflictError(FluidError):
    """A keyed write collided with an existing entry (duplicate add)."""


class ParseError(FluidError):
    """Malformed RDF input."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EngineError(FluidError):
    """The engine could not complete a run (e.g. retries exhausted)."""
