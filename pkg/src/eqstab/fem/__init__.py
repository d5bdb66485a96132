"""Lowest-order hexahedral discretization of the electroquasistatic potential problem."""

from .assembly import (EPS0, MaterialMap, assemble_KM, assemble_source, displacement_field,
                       element_gradients, element_laplacian)
from .benchmark import (PRESETS, ToyCapacitorConfig, build_toy_capacitor, load_config,
                        parse_config, parse_divisions)
from .mesh import HexMesh, build_box_mesh
from .problem import (BoundaryConditions, FeProblem, apply_floating_potentials,
                      conducting_nodes, floating_prolongation, partition)
from .vtk import write_vtk

__all__ = [
    "EPS0", "MaterialMap", "assemble_KM", "assemble_source", "displacement_field",
    "element_gradients", "element_laplacian", "PRESETS", "ToyCapacitorConfig",
    "build_toy_capacitor", "load_config", "parse_config", "parse_divisions", "HexMesh",
    "build_box_mesh", "BoundaryConditions", "FeProblem", "apply_floating_potentials",
    "conducting_nodes", "floating_prolongation", "partition", "write_vtk",
]
