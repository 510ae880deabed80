"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NashSeekError(Exception):
    """Base class for all package errors."""


class InputError(NashSeekError, ValueError):
    """Malformed argument: wrong shape, out-of-range time, bad window."""


class SolverError(NashSeekError):
    """A linear solve failed (e.g. singular matrix)."""


class ConvergenceError(NashSeekError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class CertificationError(NashSeekError):
    """The game is not strongly monotone."""

    def __init__(self, message: str, mu: float):
        super().__init__(message)
        self.mu = mu


class ConstructionError(NashSeekError, ValueError):
    """A realization could not be built from the given poles."""


class ConfigurationError(NashSeekError, ValueError):
    """A controller was asked to run outside its admissible configuration."""


class ValidationError(NashSeekError, ValueError):
    """One or more scenario fields are invalid.

    ``problems`` holds ``(path, message)`` pairs where path is a JSON-pointer
    style location such as ``/controller/delta``.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("; ".join(lines) if lines else "invalid scenario")


class SimulationDiverged(NashSeekError):
    """Raised when the integrated state becomes NaN or infinite."""

    def __init__(self, t: float, last_state, partial_trace=None):
        super().__init__(f"non-finite state encountered at t={t:.6g}")
        self.t = t
        self.last_state = last_state
        self.partial_trace = partial_trace


class OutputError(NashSeekError, OSError):
    """An output path could not be written."""


class ParseError(InputError):
    """A scenario document is not well-formed JSON."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column
