"""Complex CSR storage.

:class:`ComplexSparseMatrix` is the single operator container used by the
whole toolkit.  Arithmetic that is awkward to write by hand (sparse
products, block stacking) goes through :mod:`scipy.sparse`, which shares
the same CSR arrays without copying.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class ComplexSparseMatrix:
    """Immutable complex matrix in compressed sparse row format.

    Column indices are strictly increasing inside every row, so there are
    no duplicate entries.  Explicit zeros are allowed and kept; the FE
    partitioning relies on them to expose exactly-zero blocks.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        for arr in (ro, ci, va):
            arr.setflags(write=False)

        if ro.shape != (self.nrows + 1,) or ro[0] != 0:
            raise ValueError("row_offsets must have length nrows+1 and start at 0")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be monotone")
        if ci.shape != (ro[-1],) or va.shape != (ro[-1],):
            raise ValueError("col_indices/values length must equal row_offsets[-1]")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.ncols:
                raise ValueError("column index out of range")
            # strictly increasing inside each row; ignore steps across row starts
            steps = np.diff(ci) > 0
            row_start = np.zeros(ci.size, dtype=bool)
            row_start[ro[1:-1][ro[1:-1] < ci.size]] = True
            if not np.all(steps | row_start[1:]):
                raise ValueError("column indices must be strictly increasing within each row")
        if not np.all(np.isfinite(va)):
            raise ValueError("non-finite value in sparse matrix")

    # construction ---------------------------------------------------------

    @classmethod
    def from_scipy(cls, mat) -> "ComplexSparseMatrix":
        csr = sp.csr_array(mat, dtype=np.complex128)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def identity(cls, n: int) -> "ComplexSparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def diag(cls, d) -> "ComplexSparseMatrix":
        d = np.asarray(d, dtype=np.complex128)
        n = d.size
        return cls(n, n, np.arange(n + 1), np.arange(n), d)

    @classmethod
    def from_dense(cls, a) -> "ComplexSparseMatrix":
        a = np.asarray(a, dtype=np.complex128)
        rows, cols = np.nonzero(a)
        return from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    # views ----------------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def to_scipy(self) -> sp.csr_array:
        idx = np.int32 if self.nnz < 2**31 - 1 else np.int64
        return sp.csr_array(
            (self.values, self.col_indices.astype(idx), self.row_offsets.astype(idx)),
            shape=self.shape,
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))

    # algebra --------------------------------------------------------------

    def matvec(self, x) -> np.ndarray:
        return self.to_scipy() @ np.asarray(x)

    def __matmul__(self, other):
        if isinstance(other, ComplexSparseMatrix):
            return ComplexSparseMatrix.from_scipy(self.to_scipy() @ other.to_scipy())
        return self.matvec(other)

    def __add__(self, other: "ComplexSparseMatrix") -> "ComplexSparseMatrix":
        return ComplexSparseMatrix.from_scipy(self.to_scipy() + other.to_scipy())

    def __sub__(self, other: "ComplexSparseMatrix") -> "ComplexSparseMatrix":
        return ComplexSparseMatrix.from_scipy(self.to_scipy() - other.to_scipy())

    def scaled(self, factor) -> "ComplexSparseMatrix":
        return ComplexSparseMatrix(
            self.nrows, self.ncols, self.row_offsets, self.col_indices,
            self.values * factor,
        )

    def transpose(self) -> "ComplexSparseMatrix":
        """Materialized transpose (no conjugation)."""
        csc = self.to_scipy().tocsc()
        return ComplexSparseMatrix(
            self.ncols, self.nrows, csc.indptr, csc.indices, csc.data
        )

    @property
    def T(self) -> "ComplexSparseMatrix":
        return self.transpose()

    def conj(self) -> "ComplexSparseMatrix":
        return ComplexSparseMatrix(
            self.nrows, self.ncols, self.row_offsets, self.col_indices,
            np.conj(self.values),
        )

    def diagonal(self) -> np.ndarray:
        n = min(self.nrows, self.ncols)
        out = np.zeros(n, dtype=np.complex128)
        rows = self.row_ids()
        on = rows == self.col_indices
        out[rows[on]] = self.values[on]
        return out

    def row_abs_sums(self) -> np.ndarray:
        return np.add.reduceat(
            np.abs(np.append(self.values, 0.0)), self.row_offsets[:-1]
        ) * (np.diff(self.row_offsets) > 0)

    def norm_inf(self) -> float:
        if self.nrows == 0:
            return 0.0
        return float(self.row_abs_sums().max())

    def norm_1(self) -> float:
        if self.ncols == 0:
            return 0.0
        col = np.zeros(self.ncols)
        np.add.at(col, self.col_indices, np.abs(self.values))
        return float(col.max())

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "ComplexSparseMatrix":
        """Extract ``A[rows][:, cols]``, keeping explicit zeros."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        colmap = -np.ones(self.ncols, dtype=np.int64)
        colmap[cols] = np.arange(cols.size)
        starts = self.row_offsets[rows]
        counts = self.row_offsets[rows + 1] - starts
        # gather the selected rows' entries, in row order
        idx = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        idx = idx + np.arange(counts.sum())
        new_cols = colmap[self.col_indices[idx]]
        keep = new_cols >= 0
        new_rows = np.repeat(np.arange(rows.size), counts)[keep]
        return from_coo(rows.size, cols.size, new_rows, new_cols[keep], self.values[idx][keep])

    def row_is_empty(self) -> np.ndarray:
        """True for rows whose stored values are all exactly zero."""
        return self.row_abs_sums() == 0.0

    def is_symmetric(self) -> bool:
        """Exact (bitwise) complex symmetry A == A^T, explicit zeros ignored."""
        if self.nrows != self.ncols:
            return False
        d = self.to_scipy() - self.transpose().to_scipy()
        return d.count_nonzero() == 0

    def __repr__(self):
        return f"ComplexSparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def from_coo(nrows: int, ncols: int, rows, cols, vals) -> ComplexSparseMatrix:
    """Build a CSR matrix from coordinate arrays, summing duplicates.

    Duplicates are summed with ``np.bincount`` in input order, so the result
    is reproducible for a fixed triplet sequence.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=np.complex128).ravel()
    if not (rows.size == cols.size == vals.size):
        raise ValueError("rows, cols and vals must have equal length")
    if rows.size and (rows.min() < 0 or rows.max() >= nrows
                      or cols.min() < 0 or cols.max() >= ncols):
        raise IndexError("triplet index out of range")
    if rows.size == 0:
        return ComplexSparseMatrix(nrows, ncols, np.zeros(nrows + 1), np.zeros(0), np.zeros(0))

    keys = rows * ncols + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    data = (np.bincount(inverse, weights=vals.real, minlength=uniq.size)
            + 1j * np.bincount(inverse, weights=vals.imag, minlength=uniq.size))
    urows = uniq // ncols
    ucols = uniq % ncols
    offsets = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(urows, minlength=nrows), out=offsets[1:])
    return ComplexSparseMatrix(nrows, ncols, offsets, ucols, data)


def from_triplets(nrows: int, ncols: int,
                  entries: Iterable[tuple[int, int, complex]]) -> ComplexSparseMatrix:
    """Build a matrix from ``(row, col, value)`` triplets; duplicates are summed."""
    entries = list(entries)
    if not entries:
        return from_coo(nrows, ncols, [], [], [])
    rows, cols, vals = zip(*entries)
    return from_coo(nrows, ncols, rows, cols, vals)


def bmat(blocks) -> ComplexSparseMatrix:
    """Stack a 2-D list of blocks (``None`` for empty) into one matrix."""
    sblocks = [[None if b is None else b.to_scipy() for b in row] for row in blocks]
    return ComplexSparseMatrix.from_scipy(sp.block_array(sblocks, format="csr"))
