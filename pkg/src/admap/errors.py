"""Exception types shared across the package."""


class LandscapeError(Exception):
    """Base class for all admap errors."""


class RejectedInput(LandscapeError):
    """State or argument violates a model's declared domain."""


class Unsupported(LandscapeError):
    """Operation not available for this model kind."""


class NumericError(LandscapeError):
    """Non-finite arithmetic. ``layer`` names the network layer at fault."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class ParseError(LandscapeError):
    """Malformed weight file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CompositionError(LandscapeError):
    """Generator and descriptor network dimensions do not agree."""


class ConfigError(LandscapeError):
    """Bad run configuration."""


class DivergenceError(LandscapeError):
    """Chain-of-states refinement blew up; retry with a smaller step size."""


class TuningFailure(LandscapeError):
    """Basin count exceeded the configured ceiling, a symptom of poorly tuned (T, alpha)."""
