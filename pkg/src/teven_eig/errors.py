"""Exception types shared across the solver modules."""


class TevenError(Exception):
    """Base class for all errors raised by this package."""


class StructureError(TevenError, ValueError):
    """The matrix polynomial does not have the required T-even structure."""


class PolynomialFormatError(TevenError, ValueError):
    """A manifest or coefficient file could not be read consistently."""


class ShiftOnSpectrum(TevenError):
    """The shift is (numerically) an eigenvalue of P; P(zeta) cannot be factored."""

    def __init__(self, zeta, min_pivot=None, threshold=None):
        self.zeta = zeta
        self.min_pivot = min_pivot
        self.threshold = threshold
        msg = f"shift {zeta!r} lies on the spectrum"
        if min_pivot is not None:
            msg += f" (smallest pivot {min_pivot:.3e} <= {threshold:.3e})"
        super().__init__(msg)


class Breakdown(TevenError):
    """Orthogonalization residual vanished: the Krylov space is invariant."""

    def __init__(self, residual, reference):
        self.residual = residual
        self.reference = reference
        super().__init__(
            f"Krylov breakdown: residual {residual:.3e} vs reference {reference:.3e}"
        )


class NoConvergence(TevenError):
    """The outer iteration hit its cycle limit before locking enough values."""

    def __init__(self, max_cycles, result=None):
        self.max_cycles = max_cycles
        self.result = result
        super().__init__(f"no convergence within {max_cycles} cycles")


class QZError(TevenError):
    """Dense generalized Schur computation failed."""


class SingularFactorError(TevenError):
    """A pivoted LU factorization produced a pivot below the breakdown threshold."""

    def __init__(self, min_pivot, threshold):
        self.min_pivot = min_pivot
        self.threshold = threshold
        super().__init__(f"smallest pivot {min_pivot:.3e} <= threshold {threshold:.3e}")


class OracleCapExceeded(TevenError, ValueError):
    """A dense oracle or materialization was requested beyond its size cap."""
