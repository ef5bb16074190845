class Unsupported(Exception):
    """A step or parameter combination the requested backend cannot execute."""


class ProtocolSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0, expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        detail = f"{line}:{column}: {message}" if line else message
        if expected:
            detail += f" (expected {' | '.join(expected)})"
        super().__init__(detail)


class SpecError(ValueError):
    """A parsed protocol that cannot be executed as written (e.g. a missing parameter)."""
