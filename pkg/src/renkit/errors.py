"""Exception types shared across the package."""


class RenError(Exception):
    """Base class for all renkit errors."""


class DimensionError(RenError, ValueError):
    """Inconsistent array shapes or dimension metadata."""


class IllConditionedError(RenError, ArithmeticError):
    """A construction produced a matrix too ill-conditioned to invert safely."""


class InfeasibleIQCError(RenError, ValueError):
    """The requested (Q, S, R) constraint admits no feedthrough term."""


class StructureError(RenError, ValueError):
    """A matrix violates a required structural property (e.g. triangularity)."""


class ConvergenceError(RenError, RuntimeError):
    """An iterative solver hit its iteration limit.

    Carries the last residual so callers can decide whether to accept it.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class MissingCertificateError(RenError, ValueError):
    """A verification routine needs a stability certificate that is absent."""


class SimulationUnstableError(RenError, RuntimeError):
    """A simulated trajectory left the sane numeric range."""


class NumericalAbortError(RenError, RuntimeError):
    """Training hit a non-finite loss; carries the failing epoch/batch."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class FormatError(RenError, ValueError):
    """A serialized model/parameter file is malformed."""
