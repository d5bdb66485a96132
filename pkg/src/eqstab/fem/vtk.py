"""Legacy ASCII VTK output for structured brick meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import HexMesh


def write_vtk(path, mesh: HexMesh, point_data=None, cell_data=None, title="eqstab field"):
    """Write a STRUCTURED_GRID file with scalar point and cell arrays.

    Complex arrays are split into ``<name>_re`` and ``<name>_im``.
    """
    def expand(data):
        out = {}
        for name, arr in (data or {}).items():
            arr = np.asarray(arr)
            if np.iscomplexobj(arr):
                out[f"{name}_re"], out[f"{name}_im"] = arr.real, arr.imag
            else:
                out[name] = arr
        return out

    pts, cells = expand(point_data), expand(cell_data)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} {mesh.nz + 1}",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{x:.9e} {y:.9e} {z:.9e}" for x, y, z in mesh.coordinates]
    for section, data, count in (("POINT_DATA", pts, mesh.n_nodes),
                                 ("CELL_DATA", cells, mesh.n_elements)):
        if not data:
            continue
        lines.append(f"{section} {count}")
        for name, arr in data.items():
            if arr.shape != (count,):
                raise ValueError(f"{name}: expected {count} values, got {arr.shape}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.9e}" for v in arr]
    Path(path).write_text("\n".join(lines) + "\n")
