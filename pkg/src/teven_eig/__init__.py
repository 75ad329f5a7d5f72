"""Structure-preserving rational Krylov eigensolver for real T-even matrix polynomials."""

from .densekernels import dense_polyeig_oracle
from .errors import (Breakdown, NoConvergence, OracleCapExceeded, PolynomialFormatError, QZError,
                     ShiftOnSpectrum, SingularFactorError, StructureError, TevenError)
from .krylovschur import EigenResult, FinitePair, SolverConfig, run
from .linearize import EvenLinearization, build_linearization
from .matpoly import (MatrixPolynomial, check_structure, evaluate, generate_butterfly,
                      generate_gyroscopic, is_t_even, random_teven, read_polynomial, reversal,
                      write_polynomial)

__version__ = "0.1.0"

__all__ = [
    "Breakdown", "EigenResult", "EvenLinearization", "FinitePair", "MatrixPolynomial",
    "NoConvergence", "OracleCapExceeded", "PolynomialFormatError", "QZError", "ShiftOnSpectrum",
    "SingularFactorError", "SolverConfig", "StructureError", "TevenError", "build_linearization",
    "check_structure", "dense_polyeig_oracle", "evaluate", "generate_butterfly",
    "generate_gyroscopic", "is_t_even", "random_teven", "read_polynomial", "reversal", "run",
    "write_polynomial",
]
