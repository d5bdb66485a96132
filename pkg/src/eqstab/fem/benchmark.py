"""Layered parallel-plate capacitor whose plates are bridged by a conducting bar.

The box ``[0, d]^3`` has grounded plate ``x = 0`` and driven plate
``x = d``.  A slab ``d_o <= x <= d_o + d_i`` (full extent in y and z) has
``eps_i``; the rest has ``eps_o``.  A bar of square cross-section
``bar`` centred in y and z runs along x from plate to plate and conducts
with ``sigma_i`` inside the slab and ``sigma_o`` outside.  With
``sigma_o/sigma_i == eps_o/eps_i`` the potential depends on x only, so

    |D| = V / (d_i/eps_i + 2 d_o/eps_o)

everywhere, and trilinear elements reproduce it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .assembly import EPS0, MaterialMap
from .mesh import build_box_mesh
from .problem import BoundaryConditions, FeProblem, partition

# region tags
OUTER_INSULATOR, SLAB_INSULATOR, OUTER_BAR, SLAB_BAR = 0, 1, 2, 3


@dataclass(frozen=True)
class ToyCapacitorConfig:
    d: float = 0.22
    d_i: float = 0.02
    d_o: float = 0.10
    bar: float = 0.02
    eps_i: float = EPS0
    eps_o: float = 2 * EPS0
    sigma_i: float = 2.98e7
    sigma_o: float = 5.96e7
    f: float = 50.0
    V: float = 1.0
    divisions: tuple = (11, 11, 11)

    def __post_init__(self):
        if not math.isclose(2 * self.d_o + self.d_i, self.d, rel_tol=1e-12):
            raise ValueError("d must equal 2*d_o + d_i")
        if not 0 < self.bar <= self.d:
            raise ValueError("bar width must be in (0, d]")
        for name in ("d", "d_i", "d_o", "eps_i", "eps_o"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_i < 0 or self.sigma_o < 0 or self.f < 0:
            raise ValueError("conductivities and frequency must be non-negative")

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.f

    def analytic_D(self) -> float:
        return self.V / (self.d_i / self.eps_i + 2 * self.d_o / self.eps_o)

    def region(self, x, y, z) -> int:
        in_slab = self.d_o < x < self.d_o + self.d_i
        lo, hi = (self.d - self.bar) / 2, (self.d + self.bar) / 2
        in_bar = lo < y < hi and lo < z < hi
        return (SLAB_BAR if in_slab else OUTER_BAR) if in_bar else (
            SLAB_INSULATOR if in_slab else OUTER_INSULATOR)

    def materials(self) -> MaterialMap:
        return MaterialMap(
            sigma={OUTER_INSULATOR: 0.0, SLAB_INSULATOR: 0.0,
                   OUTER_BAR: self.sigma_o, SLAB_BAR: self.sigma_i},
            eps={OUTER_INSULATOR: self.eps_o, SLAB_INSULATOR: self.eps_i,
                 OUTER_BAR: self.eps_o, SLAB_BAR: self.eps_i},
            names={OUTER_INSULATOR: "outer", SLAB_INSULATOR: "slab",
                   OUTER_BAR: "outer-bar", SLAB_BAR: "slab-bar"},
        )


PRESETS = {
    "toy-capacitor": ToyCapacitorConfig(),
    # 22^3 elements: 23^3 nodes minus two 23x23 plates = 11109 unknowns
    "toy-capacitor-fine": ToyCapacitorConfig(divisions=(22, 22, 22)),
}


def parse_divisions(text) -> tuple:
    if isinstance(text, (tuple, list)):
        parts = [int(v) for v in text]
    else:
        parts = [int(v) for v in str(text).lower().replace(",", "x").split("x") if v]
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3 or min(parts) < 1:
        raise ValueError(f"mesh must be N or NxNxN with positive N, got {text!r}")
    return tuple(parts)


def parse_config(text: str) -> ToyCapacitorConfig:
    """Flat ``key = value`` lines; ``preset = <name>`` selects the starting point.

    Lines starting with ``#`` are comments.  Keys are the fields of
    :class:`ToyCapacitorConfig`; ``mesh`` is accepted as an alias of
    ``divisions`` (``11x11x11``).
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.lower()] = val
    base = PRESETS.get(values.pop("preset", "toy-capacitor"))
    if base is None:
        raise ValueError(f"unknown preset; available: {', '.join(PRESETS)}")
    known = {f.name.lower(): f.name for f in fields(ToyCapacitorConfig)}
    kwargs = {}
    for key, val in values.items():
        if key in ("mesh", "divisions"):
            kwargs["divisions"] = parse_divisions(val)
        elif key in known:
            kwargs[known[key]] = float(val)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return replace(base, **kwargs)


def load_config(path_or_preset) -> ToyCapacitorConfig:
    if path_or_preset in PRESETS:
        return PRESETS[path_or_preset]
    return parse_config(Path(path_or_preset).read_text())


def build_toy_capacitor(config: ToyCapacitorConfig | None = None, divisions=None) -> FeProblem:
    config = config or PRESETS["toy-capacitor"]
    if divisions is not None:
        config = replace(config, divisions=parse_divisions(divisions))
    mesh = build_box_mesh((config.d,) * 3, config.divisions, config.region)
    left, right = mesh.boundary_nodes("x0"), mesh.boundary_nodes("x1")
    bc = BoundaryConditions(
        dirichlet=np.concatenate([left, right]),
        values=np.concatenate([np.zeros(left.size), np.full(right.size, config.V)]),
    )
    return partition(mesh, config.materials(), bc)
