"""Exception types raised by the solvers and state-engine operations."""


class PacsimError(Exception):
    """Base class for all package-specific errors."""


class StiffnessError(PacsimError):
    """Adaptive step size underflowed; the integrator cannot proceed."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"step-size underflow near t = {t:.6e} s")


class InstabilityError(PacsimError):
    """Drift matrix is not Hurwitz; no stationary covariance exists."""

    def __init__(self, eigenvalues, message=None):
        self.eigenvalues = eigenvalues
        super().__init__(
            message
            or "drift matrix is not Hurwitz; eigenvalue real parts: "
            + ", ".join(f"{ev.real:.4e}" for ev in eigenvalues)
        )


class ConditioningError(PacsimError):
    """A measurement branch has (numerically) zero probability."""


class TruncationError(PacsimError):
    """An operation would push state support past the Fock-space cutoff."""


class InsufficientDataError(PacsimError):
    """A trajectory is too short for the requested fit or analysis."""


class UndefinedStatisticError(PacsimError):
    """A statistic is undefined for the given state (e.g. zero mean count)."""


class ConvergenceError(PacsimError):
    """An adaptive quadrature or series did not reach its tolerance."""
