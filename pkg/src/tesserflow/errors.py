"""Shared exception hierarchy.

Every error raised by the package derives from TesserflowError so hosts
can catch one base type.  Subsystems define their specific errors next
to the code that raises them; only the errors shared across subsystems
live here.
"""


class TesserflowError(Exception):
    pass


class SyntaxError_(TesserflowError):
    """Parse failure in query or schema text, with position info."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class TypeError_(TesserflowError):
    pass


class IoError(TesserflowError):
    pass


class BadParam(TesserflowError):
    """Argument outside its documented domain."""
