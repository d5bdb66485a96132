"""BiCGStab and ILU(0)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import spsolve_triangular

from .errors import NoConvergence, ZeroDiagonal
from .sparse import ComplexSparseMatrix, from_coo


def _as_apply(op):
    if op is None:
        return None
    if isinstance(op, ComplexSparseMatrix):
        mat = op.to_scipy()
        return lambda v: mat @ v
    if hasattr(op, "solve"):
        return op.solve
    if callable(op):
        return op
    raise TypeError(f"cannot apply object of type {type(op).__name__}")


def bicgstab(A, b, tol: float = 1e-10, maxit: int = 1000, precond=None, x0=None):
    """Preconditioned BiCGStab (van der Vorst), complex arithmetic.

    ``A`` is a :class:`ComplexSparseMatrix` or a callable ``v -> A v``;
    ``precond`` is anything with ``.solve(v)`` or a callable applying the
    approximate inverse.  Convergence is judged on the true relative
    residual ``||b - A x|| / ||b||``.  Whenever the recursive residual
    claims convergence but the true one disagrees, the true residual is
    swapped in and iteration continues.

    Returns ``(x, iterations)`` where iterations counts full steps (two
    products with ``A`` each); a step that converges half-way counts as one.
    """
    apply_A = _as_apply(A)
    apply_M = _as_apply(precond) or (lambda v: v)
    b = np.asarray(b, dtype=np.complex128)
    n = b.size
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n, dtype=np.complex128), 0

    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.array(x0, dtype=np.complex128)
    r = b - apply_A(x)
    res = np.linalg.norm(r) / bnorm
    best_x, best_res = x.copy(), res
    if res <= tol:
        return x, 0

    rhat = r.copy()
    rho = alpha = omega = 1.0 + 0j
    v = np.zeros(n, dtype=np.complex128)
    p = np.zeros(n, dtype=np.complex128)

    def true_residual(xc):
        rt = b - apply_A(xc)
        return rt, np.linalg.norm(rt) / bnorm

    for it in range(1, maxit + 1):
        rho_new = np.vdot(rhat, r)
        if rho_new == 0:
            # breakdown: restart the shadow space from the current residual
            rhat = r.copy()
            rho_new = np.vdot(rhat, r)
            p[:] = 0
            v[:] = 0
            rho = alpha = omega = 1.0 + 0j
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = apply_M(p)
        v = apply_A(phat)
        denom = np.vdot(rhat, v)
        if denom == 0:
            break
        alpha = rho_new / denom
        s = r - alpha * v

        if np.linalg.norm(s) / bnorm <= tol:
            xh = x + alpha * phat
            rt, tres = true_residual(xh)
            if tres < best_res:
                best_x, best_res = xh.copy(), tres
            if tres <= tol:
                return xh, it

        shat = apply_M(s)
        t = apply_A(shat)
        tt = np.vdot(t, t)
        omega = np.vdot(t, s) / tt if tt != 0 else 0.0
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        rho = rho_new

        if np.linalg.norm(r) / bnorm <= tol:
            r, tres = true_residual(x)
            if tres < best_res:
                best_x, best_res = x.copy(), tres
            if tres <= tol:
                return x, it
        if omega == 0:
            break

    _, tres = true_residual(x)
    if tres < best_res:
        best_x, best_res = x.copy(), tres
    raise NoConvergence(
        f"BiCGStab stopped after {it} iterations at relative residual {best_res:.3e} "
        f"(tol {tol:.1e})",
        x=best_x, residual=best_res, iterations=it,
    )


@dataclass(frozen=True)
class Ilu0Preconditioner:
    """Incomplete LU with zero fill: ``L`` unit lower, ``U`` upper, pattern of ``A``."""

    L: ComplexSparseMatrix
    U: ComplexSparseMatrix

    def __post_init__(self):
        object.__setattr__(self, "_Ls", self.L.to_scipy())
        object.__setattr__(self, "_Us", self.U.to_scipy())

    def solve(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.complex128)
        y = spsolve_triangular(self._Ls, v, lower=True, unit_diagonal=True)
        return spsolve_triangular(self._Us, y, lower=False)

    def solve_T(self, v) -> np.ndarray:
        """Apply ``(L U)^-T``."""
        v = np.asarray(v, dtype=np.complex128)
        y = spsolve_triangular(self._Us.T.tocsr(), v, lower=True)
        return spsolve_triangular(self._Ls.T.tocsr(), y, lower=False, unit_diagonal=True)

    def matvec(self, v) -> np.ndarray:
        return self._Ls @ (self._Us @ np.asarray(v, dtype=np.complex128))

    def matvec_T(self, v) -> np.ndarray:
        return self._Us.T @ (self._Ls.T @ np.asarray(v, dtype=np.complex128))

    __call__ = solve


def ilu0(A: ComplexSparseMatrix) -> Ilu0Preconditioner:
    """ILU(0) by row-wise (IKJ) elimination restricted to the pattern of ``A``."""
    if A.nrows != A.ncols:
        raise ValueError("ilu0 needs a square matrix")
    n = A.nrows
    ro = A.row_offsets
    ci = A.col_indices
    vals = A.values.copy()
    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for pos in range(ro[i], ro[i + 1]):
            if ci[pos] == i:
                diag_pos[i] = pos
                break
        if diag_pos[i] < 0 or vals[diag_pos[i]] == 0:
            raise ZeroDiagonal(i)

    cols = ci.tolist()
    w = vals.tolist()  # python complex list is much faster than numpy scalars in loops
    for i in range(n):
        start, end = int(ro[i]), int(ro[i + 1])
        where = {cols[p]: p for p in range(start, end)}
        for pos in range(start, int(diag_pos[i])):
            k = cols[pos]
            ukk = w[diag_pos[k]]
            if ukk == 0:
                raise ZeroDiagonal(k)
            lik = w[pos] / ukk
            w[pos] = lik
            for kp in range(int(diag_pos[k]) + 1, int(ro[k + 1])):
                target = where.get(cols[kp])
                if target is not None:
                    w[target] -= lik * w[kp]
        if w[diag_pos[i]] == 0:
            raise ZeroDiagonal(i)

    w = np.asarray(w, dtype=np.complex128)
    rows = A.row_ids()
    lower = ci < rows
    upper = ~lower
    L = from_coo(n, n, np.concatenate([rows[lower], np.arange(n)]),
                 np.concatenate([ci[lower], np.arange(n)]),
                 np.concatenate([w[lower], np.ones(n)]))
    U = from_coo(n, n, rows[upper], ci[upper], w[upper])
    return Ilu0Preconditioner(L=L, U=U)
