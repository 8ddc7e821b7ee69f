"""Exception types shared across the package."""


class AdaptQuadError(Exception):
    """Base class for every error raised by this package."""


class NotSkew(AdaptQuadError, ValueError):
    pass


class Degenerate(AdaptQuadError, ValueError):
    pass


class DegenerateForce(AdaptQuadError, ValueError):
    """Desired force too small to define a thrust direction."""


class NonFinite(AdaptQuadError, FloatingPointError):
    pass


class Diverged(AdaptQuadError, RuntimeError):
    """Tracking distance exceeded the abort radius."""

    def __init__(self, msg, t=None, distance=None):
        super().__init__(msg)
        self.t = t
        self.distance = distance


class PoleCollision(AdaptQuadError, ValueError):
    pass


class UnboundedSample(AdaptQuadError, RuntimeError):
    pass


class EmptyWindow(AdaptQuadError, ValueError):
    pass


class ConfigError(AdaptQuadError, ValueError):
    """Configuration problem, optionally located at a line and column."""

    def __init__(self, msg, line=None, col=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {col}" if col is not None else "") + ")"
        super().__init__(msg + loc)
        self.line = line
        self.col = col


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass
