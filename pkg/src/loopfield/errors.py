"""Exception hierarchy shared across the package."""


class LoopfieldError(Exception):
    """Base class for all loopfield errors."""


class DomainError(LoopfieldError, ValueError):
    """An argument violates an operation's precondition."""


class ValidationError(LoopfieldError, ValueError):
    """External data (a loop file, an oracle table) fails validation."""


class ConstructionError(LoopfieldError, RuntimeError):
    """A randomized construction exhausted its retry budget."""


class ReconstructionError(LoopfieldError, RuntimeError):
    """No candidate loop matched the oracle within tolerance."""

    def __init__(self, message: str, best_residual: float | None = None,
                 candidates_tried: int = 0):
        super().__init__(message)
        self.best_residual = best_residual
        self.candidates_tried = candidates_tried
