"""Exception types raised by the library.

Every failure mode that callers may want to handle separately gets its own
class; the CLI maps these onto distinct exit codes.
"""


class QpdynError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(QpdynError, ValueError):
    """A physical parameter violates its documented constraints."""


class DomainError(QpdynError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class DegenerateSystemError(QpdynError, ValueError):
    """The rate system has no decay channel (r = s = 0)."""


class NegativeRateError(QpdynError, ValueError):
    """Solution parameters imply a negative rate (inconsistent fit).

    Carries the name and value of the offending rate.
    """

    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"extracted {name} = {value:.6g} 1/s is negative; "
                         "solution parameters are inconsistent")


class StepSizeUnderflowError(QpdynError, RuntimeError):
    """Adaptive integrator cannot meet its tolerance at any step size."""


class InsufficientDataError(QpdynError, ValueError):
    """Too few samples remain for the requested fit."""


class DegenerateTraceError(QpdynError, ValueError):
    """Trace is constant within noise; only the background rate is identifiable."""


class NonConvergenceError(QpdynError, RuntimeError):
    """Iteration limit reached.  Carries the best parameters seen so far."""

    def __init__(self, message: str, best_params=None, best_cost: float | None = None):
        self.best_params = best_params
        self.best_cost = best_cost
        super().__init__(message)


class InsufficientSpreadError(QpdynError, ValueError):
    """Independent variable range too narrow for a stable regression."""


class InvalidGeometryError(QpdynError, ValueError):
    """Geometry violates one or more invariants; lists all violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid geometry: " + "; ".join(self.violations))


class NoRootFoundError(QpdynError, RuntimeError):
    """Root scan found no sign change.  Carries scan diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class InvalidResolutionError(QpdynError, ValueError):
    """Requested spatial resolution is too coarse."""


class TraceParseError(QpdynError, ValueError):
    """A data file does not conform to its format.  Carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(message + where)


class UnitParseError(QpdynError, ValueError):
    """A quantity string is missing a unit or carries an unknown one."""
