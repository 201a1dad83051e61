"""Exception hierarchy shared across the package."""


class GuardsetError(Exception):
    """Base class for all library errors."""


class GeometryDegenerate(GuardsetError):
    """An operation collapsed its input below the representable minimum."""


class EmptyRegion(GuardsetError):
    """An operation that requires a non-empty region received an empty one."""


class PointOutsideEnvironment(GuardsetError):
    """A query point lies outside the (closed) environment."""


class RefinementDiverged(GuardsetError):
    """Mesh refinement exceeded its Steiner-vertex budget."""


class SplitDiverged(GuardsetError):
    """Convex-cell subdivision exceeded the maximum recursion depth."""


class SamplingStagnated(GuardsetError):
    """A sampling method hit its iteration cap or stopped making progress."""


class ParseError(GuardsetError):
    """A map file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GuardsetError):
    """A constructed object violates one of its invariants."""


class InvalidBest(GuardsetError):
    """A guard count is smaller than the recorded best-known count."""
