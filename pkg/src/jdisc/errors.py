"""Exception hierarchy shared by the solvers and the CLI."""


class JDiscError(Exception):
    """Base class for all errors raised by this package."""


class ResolutionError(JDiscError):
    """Grid too coarse for the requested operation."""


class WindingError(JDiscError):
    """Winding number undefined (curve hits zero)."""


class CorrespondenceError(JDiscError):
    """J_st + J is singular, so J has no complex matrix."""


class DegenerateStructureError(JDiscError):
    """det(I - A conj(A)) vanishes (or the taming boundary is hit)."""


class TamingError(JDiscError):
    """A structure failed the taming check where one was required."""


class EllipticityError(JDiscError):
    """Beltrami coefficient bound q0 >= 1."""


class DivergenceError(JDiscError):
    """Fixed-point iteration stagnated or diverged."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class AccuracyError(JDiscError):
    """A posteriori accuracy check failed."""


class HypothesisError(JDiscError):
    """Input violates the hypotheses of an operation (e.g. |w| bounds)."""


class BoundaryError(JDiscError):
    """Boundary data does not lie where it must."""


class AttachFailure(JDiscError):
    """Nonlinear disc solver did not converge."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


class DegeneracyError(AttachFailure):
    """Disc graph touched w = 0."""


class HomotopyClassError(AttachFailure):
    """Boundary winding number changed during the solve."""


class ContinuationBreakdown(JDiscError):
    """Step size underflow in the t-march."""

    def __init__(self, message, last_good_t=None, foliation=None):
        super().__init__(message)
        self.last_good_t = last_good_t
        self.foliation = foliation


class SetupError(JDiscError):
    """Experiment setup is inconsistent (e.g. image leaves the cylinder)."""


class ConfigError(JDiscError):
    """Invalid run configuration."""
