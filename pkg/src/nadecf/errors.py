"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Data or arguments violate a documented contract."""


class ParseError(ValueError):
    """A text input could not be parsed."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ModelFormatError(ValueError):
    """A model file is corrupt, truncated, or not a recognized container."""
