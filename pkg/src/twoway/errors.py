"""Exception hierarchy shared by every layer of the package."""


class TwowayError(Exception):
    """Base class. ``module`` and ``round`` locate the failure for CLI reporting."""

    module = "twoway"

    def __init__(self, message, round=None):
        super().__init__(message)
        self.round = round

    def describe(self):
        where = self.module if self.round is None else f"{self.module}, round {self.round}"
        return f"[{where}] {self}"


class ConfigError(TwowayError, ValueError):
    module = "config"


class SolverError(TwowayError):
    module = "prox_solver"

    def __init__(self, message, residual=float("nan"), iterations=0, round=None):
        super().__init__(message, round=round)
        self.residual = residual
        self.iterations = iterations


class ProtocolError(TwowayError):
    module = "cluster"


class DecodeError(ProtocolError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class RoundError(ProtocolError):
    def __init__(self, message, missing=(), round=None):
        super().__init__(message, round=round)
        self.missing = tuple(missing)


class ParseError(TwowayError, ValueError):
    module = "datagen_io"

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line
