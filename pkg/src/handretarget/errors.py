"""Exception types shared across the package."""


class HandRetargetError(Exception):
    """Base class for all package errors."""


class ConventionError(HandRetargetError):
    """A motion sequence is in the wrong rotation convention for an operation."""


class ParseError(HandRetargetError):
    """A file or config could not be parsed or failed validation."""


class RayMissError(HandRetargetError):
    """A required ray-mesh query found no intersection."""

    def __init__(self, message, axis=None, joint=None):
        super().__init__(message)
        self.axis = axis
        self.joint = joint


class NumericalError(HandRetargetError):
    """A numerical operation failed (zero norms, non-finite losses, ...)."""
