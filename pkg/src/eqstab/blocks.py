"""Conductor/insulator block partitioning shared by circuits and fields.

Both MNA and the FE discretization end up as

    ( [K11 0; 0 0] + jw [M11 M12; M21 M22] ) [phi1; phi2] = [r1; r2]

where block 1 holds every unknown touched by a conductor and block 2 the
unknowns living purely in insulators.  The conductivity operator vanishes
exactly on block 2, which is what makes the ``w -> 0`` limit degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numkit import ComplexSparseMatrix, from_coo


def _empty(nrows, ncols=0):
    return from_coo(nrows, ncols, [], [], [])


@dataclass(frozen=True, eq=False)
class TwoBlockSystem:
    """Partitioned operators, right-hand-side pieces and index sets.

    The right-hand side at angular frequency ``w`` is
    ``src - KD g - jw MD g`` per block, where ``g`` holds the Dirichlet
    values and ``KD``/``MD`` the couplings of free to Dirichlet unknowns.
    ``KD`` is stored for block 1 only, as it is identically zero on block 2.

    ``sigma1``, ``eps1`` and ``eps2`` are per-unknown material values used
    by the material-aware scalings.
    """

    K11: ComplexSparseMatrix
    M11: ComplexSparseMatrix
    M12: ComplexSparseMatrix
    M22: ComplexSparseMatrix
    I1: np.ndarray
    I2: np.ndarray
    src1: np.ndarray
    src2: np.ndarray
    sigma1: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    KD1: ComplexSparseMatrix = None
    MD1: ComplexSparseMatrix = None
    MD2: ComplexSparseMatrix = None
    g: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        n1, n2 = self.I1.size, self.I2.size
        if self.K11.shape != (n1, n1) or self.M11.shape != (n1, n1):
            raise ValueError("block 11 shape does not match I1")
        if self.M12.shape != (n1, n2) or self.M22.shape != (n2, n2):
            raise ValueError("off-diagonal / block 22 shape does not match I1, I2")
        if np.intersect1d(self.I1, self.I2).size:
            raise ValueError("I1 and I2 overlap")
        nd = np.asarray(self.g).size
        for name, rows in (("KD1", n1), ("MD1", n1), ("MD2", n2)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, _empty(rows, nd))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=np.complex128))

    @property
    def n1(self) -> int:
        return self.I1.size

    @property
    def n2(self) -> int:
        return self.I2.size

    @property
    def ndof(self) -> int:
        return self.n1 + self.n2

    @property
    def M21(self) -> ComplexSparseMatrix:
        return self.M12.T

    def rhs_parts(self, g=None, g_prev=None):
        """Return ``(r1, r2, l1, l2)``: w-free part and the part multiplied by jw.

        With ``g_prev`` the second part uses the increment ``g - g_prev``,
        which is what an implicit Euler step needs (it is then multiplied
        by ``1/dt`` instead of ``jw``).
        """
        g = self.g if g is None else np.asarray(g, dtype=np.complex128)
        dg = g if g_prev is None else g - np.asarray(g_prev, dtype=np.complex128)
        r1 = self.src1 - self.KD1 @ g if g.size else self.src1.astype(complex)
        r2 = np.asarray(self.src2, dtype=np.complex128)
        l1 = -(self.MD1 @ dg) if g.size else np.zeros(self.n1, complex)
        l2 = -(self.MD2 @ dg) if g.size else np.zeros(self.n2, complex)
        return r1, r2, l1, l2

    def original_matrix(self, p: complex) -> ComplexSparseMatrix:
        """Unscaled ``K + p M`` in block order (``p = jw`` or ``1/dt``)."""
        from .numkit import bmat
        return bmat([[self.K11 + self.M11.scaled(p), self.M12.scaled(p)],
                     [self.M21.scaled(p), self.M22.scaled(p)]])

    def to_block_order(self, x_global) -> np.ndarray:
        x_global = np.asarray(x_global)
        return np.concatenate([x_global[self.I1], x_global[self.I2]])

    def to_global_order(self, x_block) -> np.ndarray:
        out = np.empty(self.ndof, dtype=np.asarray(x_block).dtype)
        out[self.I1] = x_block[:self.n1]
        out[self.I2] = x_block[self.n1:]
        return out


def split_by_conductivity(K: ComplexSparseMatrix, M: ComplexSparseMatrix,
                          conducting: np.ndarray, *, src=None, KD=None, MD=None,
                          g=None, sigma=None, eps=None) -> TwoBlockSystem:
    """Partition assembled operators given a per-unknown conductor mask.

    Raises ``ValueError`` if ``K`` has a nonzero entry in a row or column of
    the insulator block; the zero blocks must be exact.
    """
    n = K.nrows
    conducting = np.asarray(conducting, dtype=bool)
    I1 = np.flatnonzero(conducting)
    I2 = np.flatnonzero(~conducting)
    Ks = K.to_scipy()
    k_rows = np.abs(Ks).sum(axis=1)
    k_cols = np.abs(Ks).sum(axis=0)
    if np.any(k_rows[I2] != 0) or np.any(k_cols[I2] != 0):
        raise ValueError("conductivity operator is not exactly zero on the insulator block")
    src = np.zeros(n, complex) if src is None else np.asarray(src, complex)
    sigma = np.zeros(n) if sigma is None else np.asarray(sigma)
    eps = np.ones(n) if eps is None else np.asarray(eps)
    g = np.zeros(0) if g is None else g
    kwargs = {}
    if KD is not None:
        kwargs["KD1"] = KD.submatrix(I1, np.arange(KD.ncols))
        kwargs["MD1"] = MD.submatrix(I1, np.arange(MD.ncols))
        kwargs["MD2"] = MD.submatrix(I2, np.arange(MD.ncols))
        kd2 = KD.submatrix(I2, np.arange(KD.ncols))
        if np.any(kd2.values != 0):
            raise ValueError("Dirichlet coupling of the insulator block must be conductivity-free")
    return TwoBlockSystem(
        K11=K.submatrix(I1, I1), M11=M.submatrix(I1, I1),
        M12=M.submatrix(I1, I2), M22=M.submatrix(I2, I2),
        I1=I1, I2=I2, src1=src[I1], src2=src[I2],
        sigma1=sigma[I1], eps1=eps[I1], eps2=eps[I2], g=g, **kwargs,
    )
