"""Structured axis-aligned hexahedral meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# local node order: bottom face counter-clockwise, then top face
LOCAL_CORNERS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
])

# element points probed for region lookup: centroid plus corners pulled 1% in
_INSET = 0.49


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Brick mesh; node ``(i, j, k)`` has id ``i + (nx+1)*(j + (ny+1)*k)``.

    Elements are numbered the same way with ``nx, ny`` in place of
    ``nx+1, ny+1``, which matches the VTK structured-grid ordering.
    """

    nx: int
    ny: int
    nz: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    elements: np.ndarray
    regions: np.ndarray

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1) * (self.nz + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def spacing(self):
        return (self.x[1] - self.x[0], self.y[1] - self.y[0], self.z[1] - self.z[0])

    @property
    def coordinates(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        # node id runs x fastest, so flatten in Fortran order
        return np.column_stack([X.ravel("F"), Y.ravel("F"), Z.ravel("F")])

    def centroids(self) -> np.ndarray:
        return self.coordinates[self.elements].mean(axis=1)

    def node_id(self, i, j, k):
        return i + (self.nx + 1) * (j + (self.ny + 1) * k)

    def boundary_nodes(self, face: str) -> np.ndarray:
        """Node ids on ``face`` in {'x0', 'x1', 'y0', 'y1', 'z0', 'z1'}."""
        axis, side = face[0], face[1]
        n = {"x": self.nx, "y": self.ny, "z": self.nz}[axis]
        idx = np.indices((self.nx + 1, self.ny + 1, self.nz + 1)).reshape(3, -1, order="F")
        sel = idx["xyz".index(axis)] == (0 if side == "0" else n)
        return np.flatnonzero(sel)

    def node_elements(self):
        """CSR-like (offsets, element ids) listing the elements around each node."""
        nodes = self.elements.ravel()
        elems = np.repeat(np.arange(self.n_elements), 8)
        order = np.argsort(nodes, kind="stable")
        counts = np.bincount(nodes, minlength=self.n_nodes)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, elems[order]


def build_box_mesh(lengths, divisions, region_rule=None) -> HexMesh:
    """Uniform brick mesh of ``[0,Lx]x[0,Ly]x[0,Lz]``.

    ``region_rule(x, y, z) -> int`` tags each element.  It is evaluated at
    the centroid and at eight points near the corners; if those disagree a
    material interface cuts through the element and ``ValueError`` is raised.
    """
    lengths = tuple(float(v) for v in lengths)
    divisions = tuple(int(v) for v in divisions)
    if len(lengths) != 3 or len(divisions) != 3:
        raise ValueError("lengths and divisions must have three entries")
    if min(lengths) <= 0:
        raise ValueError("lengths must be positive")
    if min(divisions) < 1:
        raise ValueError("divisions must be >= 1")
    nx, ny, nz = divisions
    x, y, z = (np.linspace(0.0, L, n + 1) for L, n in zip(lengths, divisions))

    ei, ej, ek = np.indices((nx, ny, nz)).reshape(3, -1, order="F")
    corner = LOCAL_CORNERS
    elements = ((ei[:, None] + corner[:, 0]) + (nx + 1) * ((ej[:, None] + corner[:, 1])
                + (ny + 1) * (ek[:, None] + corner[:, 2])))

    if region_rule is None:
        regions = np.zeros(elements.shape[0], dtype=np.int64)
    else:
        h = np.array([x[1] - x[0], y[1] - y[0], z[1] - z[0]])
        lo = np.column_stack([x[ei], y[ej], z[ek]])
        centre = lo + h / 2
        offsets = (corner - 0.5) * 2 * _INSET * h
        regions = np.empty(elements.shape[0], dtype=np.int64)
        for e in range(elements.shape[0]):
            c = centre[e]
            tag = region_rule(*c)
            for d in offsets:
                if region_rule(*(c + d)) != tag:
                    raise ValueError(
                        f"element {e} at {tuple(np.round(c, 6))} straddles a material interface; "
                        "choose divisions that align with the region boundaries")
            regions[e] = tag
    return HexMesh(nx=nx, ny=ny, nz=nz, x=x, y=y, z=z,
                   elements=elements.astype(np.int64), regions=regions)
