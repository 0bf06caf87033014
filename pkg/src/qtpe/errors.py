"""Exception types shared across the package."""


class QtpeError(Exception):
    """Base class for package-specific errors."""


class PreconditionError(QtpeError, ValueError):
    """An argument violates a documented precondition."""


class SizeLimitError(PreconditionError):
    """A requested computation exceeds a hard size guard."""


class EnsembleFormatError(QtpeError, ValueError):
    """An ensemble file is malformed; ``field`` names the offending part."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
