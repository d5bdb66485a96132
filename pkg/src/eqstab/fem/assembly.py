"""Trilinear brick elements: global conductivity/permittivity operators and sources."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..numkit import ComplexSparseMatrix, from_coo
from .mesh import LOCAL_CORNERS, HexMesh

EPS0 = 8.8541878128e-12

_SIGNS = 2 * LOCAL_CORNERS - 1  # reference corner coordinates in {-1, 1}


@dataclass(frozen=True)
class MaterialMap:
    """Per-region conductivity (S/m, >= 0) and permittivity (F/m, > 0)."""

    sigma: dict
    eps: dict
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.sigma) != set(self.eps):
            raise ValueError("sigma and eps must define the same regions")
        for tag in self.sigma:
            if not self.sigma[tag] >= 0:
                raise ValueError(f"region {tag}: conductivity must be >= 0")
            if not self.eps[tag] > 0:
                raise ValueError(f"region {tag}: permittivity must be > 0")

    def per_element(self, mesh: HexMesh):
        missing = set(np.unique(mesh.regions).tolist()) - set(self.sigma)
        if missing:
            raise ValueError(f"no material for region tag(s) {sorted(missing)}")
        sig = np.array([float(self.sigma[t]) for t in mesh.regions.tolist()])
        eps = np.array([float(self.eps[t]) for t in mesh.regions.tolist()])
        return sig, eps


def _shape_gradients(xi):
    """Reference gradients of the 8 trilinear shape functions at points ``xi`` (q, 3)."""
    xi = np.atleast_2d(xi)
    f = 1 + xi[:, None, :] * _SIGNS[None, :, :]  # (q, 8, 3)
    g = np.empty_like(f)
    g[..., 0] = _SIGNS[:, 0] * f[..., 1] * f[..., 2]
    g[..., 1] = f[..., 0] * _SIGNS[:, 1] * f[..., 2]
    g[..., 2] = f[..., 0] * f[..., 1] * _SIGNS[:, 2]
    return g / 8.0


@lru_cache(maxsize=16)
def element_laplacian(h: tuple, nq: int = 2) -> np.ndarray:
    """``int grad N_a . grad N_b`` over a brick with edge lengths ``h`` (nq^3 Gauss points)."""
    pts, wts = np.polynomial.legendre.leggauss(nq)
    P = np.array(np.meshgrid(pts, pts, pts, indexing="ij")).reshape(3, -1).T
    W = np.prod(np.array(np.meshgrid(wts, wts, wts, indexing="ij")).reshape(3, -1), axis=0)
    scale = 2.0 / np.asarray(h)
    G = _shape_gradients(P) * scale  # physical gradients
    detj = np.prod(h) / 8.0
    ke = np.einsum("q,qai,qbi->ab", W * detj, G, G)
    ke = 0.5 * (ke + ke.T)
    ke.setflags(write=False)
    return ke


@lru_cache(maxsize=16)
def element_gradient_integrals(h: tuple) -> np.ndarray:
    """``int grad N_a`` over a brick, shape (8, 3); exact with 2-point Gauss."""
    pts, wts = np.polynomial.legendre.leggauss(2)
    P = np.array(np.meshgrid(pts, pts, pts, indexing="ij")).reshape(3, -1).T
    W = np.prod(np.array(np.meshgrid(wts, wts, wts, indexing="ij")).reshape(3, -1), axis=0)
    G = _shape_gradients(P) * (2.0 / np.asarray(h))
    return np.einsum("q,qai->ai", W * np.prod(h) / 8.0, G)


def _scatter(mesh: HexMesh, coef: np.ndarray, ke: np.ndarray) -> ComplexSparseMatrix:
    n = mesh.n_nodes
    E = mesh.elements
    rows = np.repeat(E, 8, axis=1).ravel()
    cols = np.tile(E, (1, 8)).ravel()
    vals = (coef[:, None] * ke.ravel()[None, :]).ravel()
    keep = vals != 0
    return from_coo(n, n, rows[keep], cols[keep], vals[keep])


def assemble_KM(mesh: HexMesh, materials: MaterialMap):
    """Global ``K = int grad v . sigma grad v`` and ``M = int grad v . eps grad v``.

    Elements are visited in id order and duplicates are summed in that
    order, so ``K`` and ``M`` come out bitwise symmetric.  Entries only
    touched by non-conducting elements are never stored in ``K``.
    """
    sig, eps = materials.per_element(mesh)
    ke = element_laplacian(tuple(float(v) for v in mesh.spacing))
    return _scatter(mesh, sig, ke), _scatter(mesh, eps, ke)


def assemble_source(mesh: HexMesh, J_src) -> np.ndarray:
    """``r_m = -int grad v_m . J_src`` for an element-wise constant current density (E, 3)."""
    J = np.asarray(J_src, dtype=complex)
    if J.shape != (mesh.n_elements, 3):
        raise ValueError(f"J_src must have shape ({mesh.n_elements}, 3)")
    gi = element_gradient_integrals(tuple(float(v) for v in mesh.spacing))
    contrib = -np.einsum("ai,ei->ea", gi, J)
    r = np.zeros(mesh.n_nodes, dtype=complex)
    np.add.at(r, mesh.elements.ravel(), contrib.ravel())
    return r


def element_gradients(mesh: HexMesh, phi) -> np.ndarray:
    """Gradient of the nodal field at each element centroid, shape (E, 3)."""
    phi = np.asarray(phi)
    g = _shape_gradients(np.zeros(3))[0] * (2.0 / np.asarray(mesh.spacing))
    return np.einsum("ea,ai->ei", phi[mesh.elements], g)


def displacement_field(mesh: HexMesh, materials: MaterialMap, phi) -> np.ndarray:
    """Per-element ``|D| = |eps grad phi|`` at the centroid (As/m^2).

    For a complex phasor the modulus of the complex vector is returned,
    i.e. the peak value of a single-frequency field.
    """
    _, eps = materials.per_element(mesh)
    D = -eps[:, None] * element_gradients(mesh, phi)
    return np.sqrt(np.sum(np.abs(D) ** 2, axis=1))
