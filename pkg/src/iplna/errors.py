"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside an operation's domain (bad shape, non-finite entry)."""


class DivergenceError(ArithmeticError):
    """A learning step produced a non-finite state.

    Carries the sample index so a monitor can report where stability was lost.
    """

    def __init__(self, k: int, message: str = "non-finite state"):
        super().__init__(f"step {k}: {message}")
        self.k = k


class UsageError(RuntimeError):
    """An object was used before it was initialised."""


class ConfigError(ValueError):
    """A spec string or experiment configuration failed validation."""


class DataError(ValueError):
    """Malformed input data. ``line`` is the 1-based line number, when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
