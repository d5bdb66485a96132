"""Exceptions raised by the linear-algebra layer."""


class NumkitError(Exception):
    """Base class for linear-algebra failures."""


class SingularMatrix(NumkitError):
    """A factorization met a pivot at or below the singularity threshold.

    ``pivot`` is the offending pivot magnitude (0.0 for structural
    singularity), ``threshold`` the absolute tolerance it was compared to.
    """

    def __init__(self, msg, pivot=0.0, threshold=0.0, index=None):
        super().__init__(msg)
        self.pivot = pivot
        self.threshold = threshold
        self.index = index


class NoConvergence(NumkitError):
    """An iterative solver hit its iteration limit.

    Carries the best iterate seen (smallest true residual) so callers can
    still inspect it.
    """

    def __init__(self, msg, x, residual, iterations):
        super().__init__(msg)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class ZeroDiagonal(NumkitError):
    def __init__(self, row):
        super().__init__(f"zero diagonal entry in row {row}")
        self.row = row
