"""Exception types shared across the package."""


class CtxmtError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CtxmtError, ValueError):
    """A config object is internally inconsistent or out of range."""


class CapacityError(CtxmtError, ValueError):
    """A composition part requests more examples than its pool holds."""


class EncodingError(CtxmtError, ValueError):
    """A surface token has no id in the vocabulary."""


class LengthError(CtxmtError, ValueError):
    """A sequence exceeds the model's maximum length."""


class ShapeError(CtxmtError, ValueError):
    """Array or sequence shapes do not line up."""


class DomainError(CtxmtError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InputError(CtxmtError, ValueError):
    """An input collection violates an operation's precondition."""


class TrainingDivergedError(CtxmtError, RuntimeError):
    """Training produced a non-finite loss or parameter."""
