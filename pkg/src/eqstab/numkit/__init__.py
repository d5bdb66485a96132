"""Complex sparse linear algebra: storage, solvers, ILU(0), condition estimates."""

from .condest import (condest, condest_1, condest_inf, condest_operator,
                      norm1_estimate, norm_inf_estimate)
from .direct import LuFactorization, dense_cond_exact, lu_factor
from .errors import NoConvergence, NumkitError, SingularMatrix, ZeroDiagonal
from .iterative import Ilu0Preconditioner, bicgstab, ilu0
from .sparse import ComplexSparseMatrix, bmat, from_coo, from_triplets

__all__ = [
    "ComplexSparseMatrix", "from_triplets", "from_coo", "bmat",
    "LuFactorization", "lu_factor", "dense_cond_exact",
    "bicgstab", "ilu0", "Ilu0Preconditioner",
    "condest", "condest_inf", "condest_1", "condest_operator",
    "norm1_estimate", "norm_inf_estimate",
    "NumkitError", "SingularMatrix", "NoConvergence", "ZeroDiagonal",
]
