"""Modified nodal analysis for RC circuits in the frequency domain.

Unknowns are the non-ground node potentials followed by the currents
through voltage sources::

    (A_R G A_R^T + jw A_C C A_C^T) phi + A_V i_V = -A_I i_src
                                      A_V^T phi = v_src

Incidence columns carry +1 at the branch's ``n+`` node and -1 at ``n-``;
branch current flows from ``n+`` to ``n-`` through the element.  The
ground row is dropped before assembly.

Netlist text format, one element per line (``*`` or ``#`` start a comment)::

    R <name> <n+> <n-> <ohms>
    C <name> <n+> <n-> <farads>
    I <name> <n+> <n-> <amps>      # complex amplitudes allowed, e.g. 1+0.5j
    V <name> <n+> <n-> <volts>

Node ``0`` is ground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .blocks import TwoBlockSystem, split_by_conductivity
from .numkit import ComplexSparseMatrix

GROUND = "0"


@dataclass(frozen=True, eq=False)
class CircuitNetlist:
    A_R: np.ndarray
    A_C: np.ndarray
    A_I: np.ndarray
    A_V: np.ndarray
    G: np.ndarray
    C: np.ndarray
    i_src: np.ndarray
    v_src: np.ndarray
    nodes: tuple = ()
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        n = np.asarray(self.A_R).shape[0]
        for key in ("A_R", "A_C", "A_I", "A_V"):
            a = np.asarray(getattr(self, key), dtype=float)
            if a.ndim != 2 or a.shape[0] != n:
                raise ValueError(f"{key} has {a.shape[0]} rows, expected {n}")
            if not np.all(np.isin(a, (-1.0, 0.0, 1.0))):
                raise ValueError(f"{key} entries must be in {{-1, 0, 1}}")
            if np.any((a == 1).sum(axis=0) > 1) or np.any((a == -1).sum(axis=0) > 1):
                raise ValueError(f"{key} column has more than one +1 or -1")
            object.__setattr__(self, key, a)
        for key, cols in (("G", "A_R"), ("C", "A_C"), ("i_src", "A_I"), ("v_src", "A_V")):
            vec = np.atleast_1d(np.asarray(getattr(self, key),
                                           dtype=complex if key in ("i_src", "v_src") else float))
            if vec.shape != (getattr(self, cols).shape[1],):
                raise ValueError(f"{key} length does not match {cols}")
            object.__setattr__(self, key, vec)
        if np.any(self.G <= 0) or np.any(self.C <= 0):
            raise ValueError("conductances and capacitances must be positive")
        if not self.nodes:
            object.__setattr__(self, "nodes", tuple(str(k + 1) for k in range(n)))

    @property
    def n_nodes(self) -> int:
        return self.A_R.shape[0]

    @property
    def n_vsrc(self) -> int:
        return self.A_V.shape[1]


@dataclass(frozen=True, eq=False)
class MnaSystem:
    A: ComplexSparseMatrix
    rhs: np.ndarray
    n_phi: int
    n_v: int

    def split(self, x):
        return x[:self.n_phi], x[self.n_phi:]


def _incidence(n, pairs):
    a = np.zeros((n, len(pairs)))
    for k, (p, m) in enumerate(pairs):
        if p is not None:
            a[p, k] += 1
        if m is not None:
            a[m, k] -= 1
    return a


def parse_netlist(text: str) -> CircuitNetlist:
    elements = {"R": [], "C": [], "I": [], "V": []}
    seen_nodes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("*"):
            continue
        parts = line.split()
        kind = parts[0].upper()
        if kind not in elements or len(parts) != 5:
            raise ValueError(f"line {lineno}: expected '<R|C|I|V> name n+ n- value', got {raw!r}")
        _, name, npos, nneg, value = parts
        if npos == nneg:
            raise ValueError(f"line {lineno}: element {name} is shorted ({npos} to {nneg})")
        val = complex(value.replace("i", "j")) if kind in "IV" else float(value)
        elements[kind].append((name, npos, nneg, val))
        for node in (npos, nneg):
            if node != GROUND and node not in seen_nodes:
                seen_nodes.append(node)

    if all(s.isdigit() for s in seen_nodes):
        seen_nodes.sort(key=int)
    index = {label: k for k, label in enumerate(seen_nodes)}
    n = len(seen_nodes)

    def build(kind):
        pairs = [(index.get(p), index.get(m)) for _, p, m, _ in elements[kind]]
        return _incidence(n, pairs), [v for *_, v in elements[kind]]

    A_R, R = build("R")
    A_C, C = build("C")
    A_I, I = build("I")
    A_V, V = build("V")
    return CircuitNetlist(
        A_R=A_R, A_C=A_C, A_I=A_I, A_V=A_V,
        G=1.0 / np.asarray(R, dtype=float) if R else np.zeros(0),
        C=np.asarray(C, dtype=float), i_src=np.asarray(I, dtype=complex),
        v_src=np.asarray(V, dtype=complex), nodes=tuple(seen_nodes),
        names={k: [e[0] for e in v] for k, v in elements.items()},
    )


def read_netlist(path) -> CircuitNetlist:
    return parse_netlist(Path(path).read_text())


def _operators(net: CircuitNetlist):
    """Return (K, M, src) over unknowns [phi; i_V] as scipy matrices."""
    n, nv = net.n_nodes, net.n_vsrc
    Gn = sp.csr_array(net.A_R @ np.diag(net.G) @ net.A_R.T)
    Cn = sp.csr_array(net.A_C @ np.diag(net.C) @ net.A_C.T)
    Av = sp.csr_array(net.A_V)
    K = sp.block_array([[Gn, Av], [Av.T, None]], format="csr") if nv else Gn
    M = sp.block_array([[Cn, None], [None, sp.csr_array((nv, nv))]], format="csr") if nv else Cn
    src = np.concatenate([-(net.A_I @ net.i_src), net.v_src]).astype(complex)
    return K, M, src


def assemble_mna(net: CircuitNetlist, omega: float) -> MnaSystem:
    if omega < 0:
        raise ValueError("omega must be non-negative")
    K, M, src = _operators(net)
    A = ComplexSparseMatrix.from_scipy(K + 1j * omega * M)
    return MnaSystem(A=A, rhs=src, n_phi=net.n_nodes, n_v=net.n_vsrc)


def mna_two_block(net: CircuitNetlist) -> TwoBlockSystem:
    """Partition the MNA operators into resistive (1) and capacitive-only (2) unknowns.

    Voltage-source currents belong to block 1.  Per-unknown "materials" are
    the diagonal conductance and capacitance, so the material scalings
    reproduce e.g. ``a1 = (1/R + jwC)^-1/2``, ``a2 = (jw 2C)^-1/2`` on the
    single-loop benchmark.
    """
    K, M, src = _operators(net)
    Kc = ComplexSparseMatrix.from_scipy(K)
    Mc = ComplexSparseMatrix.from_scipy(M)
    conducting = (abs(K).sum(axis=1) > 0)
    return split_by_conductivity(
        Kc, Mc, conducting, src=src,
        sigma=np.real(Kc.diagonal()), eps=np.real(Mc.diagonal()),
    )


def _dc_components(net: CircuitNetlist):
    """Union-find over resistor and voltage-source branches; ground is the last slot."""
    parent = list(range(net.n_nodes + 1))  # last slot is ground

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def ends(col):
        p = np.flatnonzero(col == 1)
        m = np.flatnonzero(col == -1)
        return (p[0] if p.size else net.n_nodes), (m[0] if m.size else net.n_nodes)

    for mat in (net.A_R, net.A_V):
        for k in range(mat.shape[1]):
            a, b = ends(mat[:, k])
            parent[find(a)] = find(b)
    return [find(i) for i in range(net.n_nodes + 1)], ends


def validate_netlist(net: CircuitNetlist, omega: float) -> list[str]:
    """Diagnostics for the ``w -> 0`` limit; never raises.

    At ``w == 0`` two things go wrong: nodes without a resistive path to
    ground have no defining equation, and current sources that feed such
    a floating island prescribe a current through capacitors only.
    """
    if omega > 0:
        return []
    comp, ends = _dc_components(net)
    ground = comp[net.n_nodes]
    warnings = []
    for i, label in enumerate(net.nodes):
        if comp[i] != ground:
            warnings.append(
                f"node {label}: no resistive path to ground, potential is uncontrolled as omega -> 0")
    names = net.names.get("I", [f"I{k + 1}" for k in range(net.A_I.shape[1])])
    for k in range(net.A_I.shape[1]):
        a, b = ends(net.A_I[:, k])
        if comp[a] != comp[b] and net.i_src[k] != 0:
            warnings.append(
                f"current source {names[k]}: currents may not be prescribed on capacitive "
                f"branches as omega -> 0 (its terminals are not DC-connected)")
    return warnings


def rc_benchmark(R: float, C: float, I: complex = 1.0) -> CircuitNetlist:
    """Single current source, C1 between nodes 1-2, C2 = C node 2-ground, R node 1-ground."""
    if R <= 0 or C <= 0:
        raise ValueError("R and C must be positive")
    return CircuitNetlist(
        A_R=np.array([[1.0], [0.0]]),
        A_C=np.array([[1.0, 0.0], [-1.0, 1.0]]),
        A_I=np.array([[1.0], [0.0]]),
        A_V=np.zeros((2, 0)),
        G=np.array([1.0 / R]), C=np.array([C, C]),
        i_src=np.array([I]), v_src=np.zeros(0),
        names={"R": ["R3"], "C": ["C1", "C2"], "I": ["I"], "V": []},
    )


RC_BENCHMARK_NETLIST = """\
* current-driven RC loop; R = 1 Ohm, C1 = C2 = 1 pF
I I  1 0 1
C C1 1 2 1e-12
C C2 2 0 1e-12
R R3 1 0 1
"""


@dataclass(frozen=True)
class ClosedFormCondition:
    kappa: float
    leading_order: float
    in_regime: bool  # 1/R > 2 w C, where the small-w expansions hold


def _rc_matrix(R, C, omega, variant):
    G = 1.0 / R
    w = omega
    if variant == "orig":
        return np.array([[G + 1j * w * C, -1j * w * C], [-1j * w * C, 2j * w * C]])
    if variant == "i":
        sw = math.sqrt(w)
        return np.array([[G + 1j * w * C, -1j * sw * C], [-1j * sw * C, 2j * C]])
    if variant == "iii":
        x = (1 + 1j) / -2 * np.sqrt(w * C / (G + 1j * w * C))
        return np.array([[1.0, x], [x, 1.0]], dtype=complex)
    raise ValueError(f"closed form available for orig, i, iii; got {variant!r}")


def _cond_2x2(a, norm):
    ord_ = np.inf if norm in ("inf", np.inf) else 1
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if det == 0:
        return math.inf
    adj = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
    return float(np.linalg.norm(a, ord_) * np.linalg.norm(adj, ord_) / abs(det))


def rc_condition_closed_form(R: float, C: float, omega: float, variant: str = "orig",
                             norm=1) -> ClosedFormCondition:
    """Exact condition number of the 2x2 benchmark matrix by symbolic inversion.

    ``leading_order`` is the small-``w`` limit: ``1 + 1/(2wRC)`` for the
    original system, ``max(2RC, 1/(2RC))`` for the symmetric frequency
    scaling (its matrix tends to ``diag(1/R, 2jC)``) and 1 for the material
    scaling.  All three matrices are complex symmetric, so the 1- and
    infinity-norm results coincide.
    """
    a = _rc_matrix(R, C, omega, variant)
    kappa = _cond_2x2(a, norm)
    if variant == "orig":
        lead = math.inf if omega == 0 else 1.0 + 1.0 / (2 * omega * R * C)
    elif variant == "i":
        lead = max(2 * R * C, 1.0 / (2 * R * C))
    else:
        lead = 1.0
    return ClosedFormCondition(kappa=kappa, leading_order=lead,
                               in_regime=1.0 / R > 2 * omega * C)
