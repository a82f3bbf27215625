"""Exception types shared across the library."""


class InvalidParameterError(ValueError):
    """A parameter is outside its admissible range."""


class EvaluationError(ValueError):
    """A user-supplied function returned a non-finite or invalid value."""


class MeshError(RuntimeError):
    """A triangulation violates conformity or tagging invariants."""


class AssemblyError(RuntimeError):
    """Element matrices cannot be formed (e.g. degenerate triangle)."""


class MatrixError(RuntimeError):
    """A system matrix fails a definiteness requirement."""


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the last residual and, when available, the best iterate.
    """

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best


class CrossCheckError(RuntimeError):
    """Two independent solvers disagreed beyond the allowed tolerance."""


class LineSearchError(RuntimeError):
    """Backtracking line search stalled; carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientDataError(ValueError):
    """Not enough usable rows to fit a convergence order."""


class ConfigError(ValueError):
    """Bad or unknown configuration key/value."""
