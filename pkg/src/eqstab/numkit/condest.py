"""Condition-number estimation without forming inverses.

The core is Hager's 1-norm power iteration in Higham's complex form.  The
infinity norm is reached through ``||B||_inf = ||B^T||_1``, so every
estimate below only needs products with ``B^T`` and with ``conj(B)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .direct import LuFactorization, lu_factor
from .errors import SingularMatrix
from .sparse import ComplexSparseMatrix

MAX_ITER = 5
RESTARTS = 2
SEED = 20230


def _sign(y: np.ndarray) -> np.ndarray:
    mag = np.abs(y)
    out = np.ones_like(y)
    nz = mag > 0
    out[nz] = y[nz] / mag[nz]
    return out


def _hager(apply, apply_adj, x0: np.ndarray, maxiter: int) -> float:
    x = x0
    est = 0.0
    for it in range(maxiter):
        y = apply(x)
        est = max(est, float(np.abs(y).sum()))
        z = apply_adj(_sign(y))
        zmax = np.abs(z)
        j = int(np.argmax(zmax))
        if it > 0 and zmax[j] <= np.real(np.vdot(z, x)):
            break
        x = np.zeros_like(x0)
        x[j] = 1.0
    return est


def norm1_estimate(apply: Callable, apply_adj: Callable, n: int,
                   maxiter: int = MAX_ITER, restarts: int = RESTARTS,
                   seed: int = SEED) -> float:
    """Lower-bound estimate of ``||B||_1`` from products ``B x`` and ``B^H z``.

    One run from the uniform vector, ``restarts`` runs from random sign
    vectors (fixed seed, so results are reproducible), and Higham's
    alternating test vector.  The largest value wins.
    """
    if n == 0:
        return 0.0
    starts = [np.full(n, 1.0 / n, dtype=np.complex128)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.choice([-1.0, 1.0], size=n).astype(np.complex128) / n)
    est = max(_hager(apply, apply_adj, x0, maxiter) for x0 in starts)

    if n > 1:
        alt = np.array([(-1) ** i * (1 + i / (n - 1)) for i in range(n)],
                       dtype=np.complex128)
    else:
        alt = np.ones(1, dtype=np.complex128)
    est = max(est, 2.0 * float(np.abs(apply(alt)).sum()) / (3.0 * n))
    return est


def norm_inf_estimate(apply: Callable, apply_T: Callable, n: int) -> float:
    """Estimate ``||B||_inf`` as ``||B^T||_1``; needs ``B x`` and ``B^T x``."""
    return norm1_estimate(apply_T, lambda z: np.conj(apply(np.conj(z))), n)


def condest_inf(A: ComplexSparseMatrix, lu: LuFactorization | None = None) -> float:
    """Estimate ``||A||_inf ||A^-1||_inf``; ``inf`` if ``A`` is singular.

    ``||A||_inf`` is computed exactly from the stored entries, the inverse
    norm is estimated through ``A^-T`` applied with the LU factors.
    """
    if lu is None:
        try:
            lu = lu_factor(A, row_scaling=True)
        except SingularMatrix:
            return float("inf")
    inv_norm = norm_inf_estimate(lu.solve, lambda x: lu.solve(x, trans="T"), A.nrows)
    return A.norm_inf() * inv_norm


def condest_1(A: ComplexSparseMatrix, lu: LuFactorization | None = None) -> float:
    if lu is None:
        try:
            lu = lu_factor(A, row_scaling=True)
        except SingularMatrix:
            return float("inf")
    inv_norm = norm1_estimate(lu.solve, lambda z: lu.solve(z, trans="H"), A.nrows)
    return A.norm_1() * inv_norm


def condest(A: ComplexSparseMatrix, lu: LuFactorization | None = None,
            norm="inf") -> float:
    if norm in ("inf", np.inf):
        return condest_inf(A, lu)
    if norm in (1, "1"):
        return condest_1(A, lu)
    raise ValueError(f"unsupported norm {norm!r}")


def condest_operator(apply, apply_T, solve, solve_T, n: int) -> float:
    """Infinity-norm condition estimate of an operator given only as callables.

    Used for left-preconditioned systems ``P^-1 A`` that are never formed.
    """
    return norm_inf_estimate(apply, apply_T, n) * norm_inf_estimate(solve, solve_T, n)
