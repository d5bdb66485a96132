"""Dirichlet elimination, floating potentials and the conductor/insulator split."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..blocks import TwoBlockSystem, split_by_conductivity
from ..numkit import ComplexSparseMatrix
from .assembly import MaterialMap, assemble_KM, assemble_source
from .mesh import HexMesh


@dataclass(frozen=True, eq=False)
class BoundaryConditions:
    """Dirichlet node ids with values (V) and floating electrode node groups.

    ``values`` are amplitudes: phasors in the frequency domain, or the
    spatial profile that a waveform multiplies in the time domain.
    """

    dirichlet: np.ndarray
    values: np.ndarray
    floating: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.dirichlet, dtype=np.int64)
        v = np.broadcast_to(np.asarray(self.values, dtype=complex), d.shape).copy()
        if np.unique(d).size != d.size:
            raise ValueError("duplicate Dirichlet nodes")
        groups = tuple(np.unique(np.asarray(g, dtype=np.int64)) for g in self.floating)
        seen = set()
        for g in groups:
            if g.size == 0:
                raise ValueError("floating group is empty")
            if seen.intersection(g.tolist()):
                raise ValueError("floating groups overlap")
            if np.intersect1d(g, d).size:
                raise ValueError("floating group touches a Dirichlet node")
            seen.update(g.tolist())
        object.__setattr__(self, "dirichlet", d)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "floating", groups)


@dataclass(frozen=True, eq=False)
class FloatingReduction:
    """Gluing map ``phi_free = P phi_reduced``; ``P`` has one 1 per row."""

    P: sp.csr_array
    masters: np.ndarray  # free index kept for each reduced unknown

    @property
    def n_removed(self) -> int:
        return self.P.shape[0] - self.P.shape[1]

    def expand(self, phi_reduced):
        return self.P @ np.asarray(phi_reduced)


def floating_prolongation(n: int, groups) -> FloatingReduction:
    """Prolongation gluing each group of (free) indices into its smallest member."""
    owner = np.arange(n)
    seen = np.zeros(n, dtype=bool)
    for g in groups:
        g = np.unique(np.asarray(g, dtype=np.int64))
        if g.size and (g.min() < 0 or g.max() >= n):
            raise IndexError("floating group index out of range")
        if np.any(seen[g]):
            raise ValueError("floating groups overlap")
        seen[g] = True
        owner[g] = g.min()
    masters, col = np.unique(owner, return_inverse=True)
    P = sp.csr_array((np.ones(n), (np.arange(n), col)), shape=(n, masters.size))
    return FloatingReduction(P=P, masters=masters)


def apply_floating_potentials(K: ComplexSparseMatrix, M: ComplexSparseMatrix, r, groups):
    """Glue each group into one unknown: ``P^T K P``, ``P^T M P``, ``P^T r``.

    Returns ``(K_red, M_red, r_red, reduction)``; ``reduction.expand``
    maps a reduced solution back onto every group member.
    """
    red = floating_prolongation(K.nrows, groups)
    P = red.P

    def glue(A):
        B = (P.T @ A.to_scipy() @ P).tocsr()
        B = ComplexSparseMatrix.from_scipy(B)
        # sums of symmetric entries can differ in the last bit; restore exactness
        return ComplexSparseMatrix.from_scipy(((B.to_scipy() + B.to_scipy().T) * 0.5).tocsr())

    return glue(K), glue(M), P.T @ np.asarray(r, dtype=complex), red


@dataclass(frozen=True, eq=False)
class FeProblem:
    """Assembled field problem reduced to free unknowns and split into blocks.

    ``sys`` works in "reduced free" numbering (after Dirichlet elimination
    and floating gluing); :meth:`nodal` turns a block-ordered solution back
    into a vector over all mesh nodes.
    """

    mesh: HexMesh
    materials: MaterialMap
    bc: BoundaryConditions
    sys: TwoBlockSystem
    free: np.ndarray
    reduction: FloatingReduction
    K: ComplexSparseMatrix = field(repr=False)
    M: ComplexSparseMatrix = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.sys.ndof

    def nodal(self, phi_block, g=None) -> np.ndarray:
        g = self.bc.values if g is None else np.asarray(g)
        reduced = self.sys.to_global_order(np.asarray(phi_block))
        out = np.zeros(self.mesh.n_nodes, dtype=complex)
        out[self.free] = self.reduction.expand(reduced)
        out[self.bc.dirichlet] = g
        return out


def conducting_nodes(mesh: HexMesh, materials: MaterialMap) -> np.ndarray:
    """Nodes touched by at least one element with ``sigma > 0``."""
    sig, _ = materials.per_element(mesh)
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    mask[mesh.elements[sig > 0].ravel()] = True
    return mask


def nodal_materials(mesh: HexMesh, materials: MaterialMap):
    """Per-node (sigma, eps_conductor, eps_all) averages over adjacent elements.

    ``sigma`` and ``eps_conductor`` average over conducting neighbours only
    (zero where there are none); ``eps_all`` averages over all neighbours.
    """
    sig, eps = materials.per_element(mesh)
    n = mesh.n_nodes
    nodes = mesh.elements.ravel()
    cond = np.repeat(sig > 0, 8)
    cnt_all = np.bincount(nodes, minlength=n)
    cnt_c = np.bincount(nodes, weights=cond.astype(float), minlength=n)
    s = np.bincount(nodes, weights=np.repeat(sig, 8), minlength=n)
    ec = np.bincount(nodes, weights=np.repeat(eps, 8) * cond, minlength=n)
    ea = np.bincount(nodes, weights=np.repeat(eps, 8), minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = np.where(cnt_c > 0, s / np.maximum(cnt_c, 1), 0.0)
        eps_c = np.where(cnt_c > 0, ec / np.maximum(cnt_c, 1), 0.0)
    return sigma, eps_c, ea / cnt_all


def _reduce_nodal(values, red: FloatingReduction, free, mode="mean"):
    v = np.asarray(values, dtype=float)[free]
    sums = red.P.T @ v
    if mode == "any":
        return sums > 0
    return sums / np.asarray(red.P.sum(axis=0)).ravel()


def partition(mesh: HexMesh, materials: MaterialMap, bc: BoundaryConditions,
              J_src=None) -> FeProblem:
    """Assemble, eliminate Dirichlet nodes, glue floating groups and split.

    Block 2 holds the unknowns whose basis support lies entirely in
    non-conducting elements; everything else (including interface nodes)
    is block 1.
    """
    K, M = assemble_KM(mesh, materials)
    n = mesh.n_nodes
    is_d = np.zeros(n, dtype=bool)
    is_d[bc.dirichlet] = True
    free = np.flatnonzero(~is_d)
    dn = bc.dirichlet

    src = np.zeros(n, dtype=complex) if J_src is None else assemble_source(mesh, J_src)
    Kf, Mf = K.submatrix(free, free), M.submatrix(free, free)
    KD, MD = K.submatrix(free, dn), M.submatrix(free, dn)

    # groups arrive as node ids; map to free numbering
    pos = np.full(n, -1)
    pos[free] = np.arange(free.size)
    groups = [pos[g] for g in bc.floating]
    Kr, Mr, sr, red = apply_floating_potentials(Kf, Mf, src[free], groups)
    Pt = red.P.T
    KDr = ComplexSparseMatrix.from_scipy((Pt @ KD.to_scipy()).tocsr())
    MDr = ComplexSparseMatrix.from_scipy((Pt @ MD.to_scipy()).tocsr())

    cond = _reduce_nodal(conducting_nodes(mesh, materials), red, free, mode="any")
    sigma, eps_c, eps_a = nodal_materials(mesh, materials)
    sig_r = _reduce_nodal(sigma, red, free)
    epsc_r = _reduce_nodal(eps_c, red, free)
    epsa_r = _reduce_nodal(eps_a, red, free)
    eps_r = np.where(cond, epsc_r, epsa_r)

    sys = split_by_conductivity(Kr, Mr, cond, src=sr, KD=KDr, MD=MDr, g=bc.values,
                                sigma=sig_r, eps=eps_r)
    return FeProblem(mesh=mesh, materials=materials, bc=bc, sys=sys, free=free,
                     reduction=red, K=K, M=M)
