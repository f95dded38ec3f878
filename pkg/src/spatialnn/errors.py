"""Error types shared across the package."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class FormatError(ValueError):
    """A binary or text input does not match its documented format."""


class LengthError(FormatError):
    """A binary payload is shorter or longer than its header declares."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class InvariantError(ValueError):
    """An internal invariant was violated (should be unreachable)."""


class UsageError(RuntimeError):
    """An API was called out of order, e.g. backward with a stale cache."""


class NonFiniteGradientError(FloatingPointError):
    """A gradient contains NaN or infinity; message names the parameter group."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss; message names the epoch."""
