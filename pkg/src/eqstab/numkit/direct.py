"""Sparse direct factorization and the dense condition-number oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SingularMatrix
from .sparse import ComplexSparseMatrix

DENSE_ORACLE_MAX_N = 2000


@dataclass(frozen=True)
class LuFactorization:
    """Sparse LU with row and column permutations: ``Pr S A Pc = L U``.

    ``S = diag(row_scale)`` is the identity unless the factorization was
    built with ``row_scaling=True``.  ``perm_r``/``perm_c`` follow SuperLU conventions: row ``i`` of ``A``
    becomes row ``perm_r[i]`` of ``Pr A``; column ``j`` of ``A`` becomes
    column ``perm_c[j]`` of ``A Pc``.
    """

    n: int
    perm_r: np.ndarray
    perm_c: np.ndarray
    L: ComplexSparseMatrix
    U: ComplexSparseMatrix
    min_pivot: float
    _superlu: object = field(repr=False, compare=False)
    row_scale: np.ndarray | None = None

    def solve(self, b, trans: str = "N") -> np.ndarray:
        """Solve ``A x = b`` (``trans='T'``: ``A^T x = b``, ``'H'``: ``A^H x = b``)."""
        b = np.asarray(b, dtype=np.complex128)
        s = self.row_scale
        if s is None:
            return self._superlu.solve(b, trans=trans)
        if trans == "N":
            return self._superlu.solve(s * b)
        # A = S^-1 (S A): A^T x = b  <=>  (S A)^T (S^-1 x) = b
        x = self._superlu.solve(b, trans=trans)
        return (np.conj(s) if trans == "H" else s) * x

    def permutation_matrices(self):
        n = self.n
        Pr = sp.csr_array((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))
        Pc = sp.csr_array((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))
        return Pr, Pc


def lu_factor(A: ComplexSparseMatrix, pivot_tol: float = 0.0,
              row_scaling: bool = False) -> LuFactorization:
    """Factor ``A`` with threshold-partial pivoting (SuperLU, no equilibration).

    ``pivot_tol`` is relative to ``||A||_inf``: a pivot with
    ``|u_kk| <= pivot_tol * ||A||_inf`` raises :class:`SingularMatrix`.  The
    default 0.0 only flags exact (structural or numerical) zero pivots.
    Library-side equilibration is switched off so that the conditioning of
    the formulation itself is what the factorization sees.

    ``row_scaling=True`` first divides every row by its largest modulus.
    The solution is unchanged, but partial pivoting then compares entries
    on a common scale, which matters when block rows differ by many orders
    of magnitude.  The pivot threshold then refers to the scaled matrix.
    """
    if A.nrows != A.ncols:
        raise ValueError(f"lu_factor needs a square matrix, got {A.shape}")
    n = A.nrows
    anorm = A.norm_inf()
    threshold = pivot_tol * anorm
    if n == 0:
        raise ValueError("empty matrix")
    if anorm == 0.0:
        raise SingularMatrix("zero matrix", pivot=0.0, threshold=threshold)
    # zero rows would otherwise surface as an opaque SuperLU message
    empty = np.flatnonzero(A.row_is_empty())
    if empty.size:
        raise SingularMatrix(
            f"{empty.size} structurally zero row(s), first is row {empty[0]}",
            pivot=0.0, threshold=threshold, index=int(empty[0]),
        )
    S = A.to_scipy()
    scale = None
    if row_scaling:
        scale = 1.0 / np.asarray(abs(S).max(axis=1).todense()).ravel()
        S = sp.diags_array(scale) @ S
        threshold = pivot_tol * float(np.max(np.asarray(abs(S).sum(axis=1)).ravel()))
    try:
        lu = splu(S.tocsc(), options={"Equil": False})
    except RuntimeError as exc:
        raise SingularMatrix(f"factorization failed: {exc}", pivot=0.0,
                             threshold=threshold) from None
    udiag = np.abs(lu.U.diagonal())
    k = int(np.argmin(udiag))
    if udiag[k] <= threshold or udiag[k] == 0.0:
        raise SingularMatrix(
            f"pivot {udiag[k]:.3e} at step {k} below threshold {threshold:.3e}",
            pivot=float(udiag[k]), threshold=threshold, index=k,
        )
    return LuFactorization(
        n=n,
        perm_r=np.asarray(lu.perm_r),
        perm_c=np.asarray(lu.perm_c),
        L=ComplexSparseMatrix.from_scipy(lu.L),
        U=ComplexSparseMatrix.from_scipy(lu.U),
        min_pivot=float(udiag[k]),
        _superlu=lu,
        row_scale=scale,
    )


def _as_dense(A) -> np.ndarray:
    if isinstance(A, ComplexSparseMatrix):
        return A.toarray()
    return np.asarray(A, dtype=np.complex128)


def dense_cond_exact(A, norm="inf") -> float:
    """Exact ``||A|| ||A^-1||`` by dense inversion (oracle; n <= 2000)."""
    a = _as_dense(A)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("square matrix required")
    if n > DENSE_ORACLE_MAX_N:
        raise ValueError(f"dense oracle limited to n <= {DENSE_ORACLE_MAX_N}, got {n}")
    ord_ = np.inf if norm in ("inf", np.inf) else 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.any(np.diag(lu) == 0):
        raise SingularMatrix("exactly singular matrix (zero pivot)")
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=a.dtype))
    return float(np.linalg.norm(a, ord_) * np.linalg.norm(inv, ord_))
