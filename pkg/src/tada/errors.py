class TadaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(TadaError):
    """Input data is malformed or inconsistent."""


class ParseError(DataError):
    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class TrainingError(TadaError):
    """Optimisation diverged (non-finite loss)."""


class VerificationError(TadaError):
    """An oracle check found a violated bound."""
