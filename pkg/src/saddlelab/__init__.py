"""saddlelab: augmented Lagrangian / Uzawa solvers and diagnostics for
structure-preserving saddle point systems."""

from .errors import (
    IllPosedKernelError,
    InvalidComplexError,
    InvalidProblemError,
    MissingQBasisError,
    NotApplicableError,
    NotSpdError,
    ProblemFormatError,
    RateUndefinedError,
    SaddleLabError,
    SingularSystemError,
    TolOrderError,
)
from .linalg import (
    GeneralizedSpectrum,
    LuFactorization,
    SpdFactorization,
    factor_lu,
    factor_spd,
    gram_orthonormal_kernel,
    smallest_singular_value,
    solve_dense,
    sym_generalized_eig,
)

__all__ = [
    "IllPosedKernelError",
    "InvalidComplexError",
    "InvalidProblemError",
    "MissingQBasisError",
    "NotApplicableError",
    "NotSpdError",
    "ProblemFormatError",
    "RateUndefinedError",
    "SaddleLabError",
    "SingularSystemError",
    "TolOrderError",
    "GeneralizedSpectrum",
    "LuFactorization",
    "SpdFactorization",
    "factor_lu",
    "factor_spd",
    "gram_orthonormal_kernel",
    "smallest_singular_value",
    "solve_dense",
    "sym_generalized_eig",
]

__version__ = "0.1.0"
