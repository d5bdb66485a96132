"""Low-frequency stabilization of the two-block system.

Every variant multiplies block row ``k`` by ``a_k`` and substitutes
``phi_k = b_k xi_k``.  Each factor is kept in the form

    scalar * x**power * diag(values)

where ``x`` is ``w`` (frequency domain) or ``1/dt`` (implicit Euler) and
``power`` is an exact fraction.  Powers of ``x`` are added before anything
is evaluated, so products such as ``jw * w**-1`` become the constant ``j``
and stay finite at ``x = 0``.  ``values`` carries per-unknown material or
diagonal data and is always finite.

The frequency-domain "unit" ``u`` is ``j`` (``jw`` multiplies ``M``); in the
time domain ``jw`` is replaced by ``1/dt`` and ``u = 1``, which makes every
coefficient real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse.csgraph as csgraph

from .blocks import TwoBlockSystem
from .numkit import (ComplexSparseMatrix, LuFactorization, SingularMatrix,
                     ZeroDiagonal, bmat, condest_inf, condest_operator, ilu0,
                     lu_factor)

VARIANT_TAGS = ("orig", "i", "ii", "iii", "iv", "v", "vi", "jacobi-l", "jacobi-s")

_ALIASES = {
    "original": "orig", "1": "i", "2": "ii", "3": "iii", "4": "iv", "5": "v", "6": "vi",
    "jacobi": "jacobi-l", "jacobileft": "jacobi-l", "jacobisym": "jacobi-s",
}


class IncompatibleSource(ValueError):
    """Insulator-block source is nonzero where the scaling needs it to vanish at w = 0."""


class SingularBlock(ArithmeticError):
    """The conductor block cannot be inverted (a conductor floats without Dirichlet contact)."""


class _UndefinedType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Undefined"

    def __bool__(self):
        return False


Undefined = _UndefinedType()


@dataclass(frozen=True)
class ScalingVariant:
    """A stabilization choice.

    ``sigma1``, ``eps1``, ``eps2`` optionally override the per-unknown
    material values for ``iii``/``iv`` with scalars; ``omega0`` is the fixed
    expansion point of ``vi``.
    """

    tag: str
    omega0: float = 0.0
    sigma1: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    exact_blocks: bool = False

    def __post_init__(self):
        tag = _ALIASES.get(self.tag.lower(), self.tag.lower())
        if tag not in VARIANT_TAGS:
            raise ValueError(f"unknown variant {self.tag!r}; choose from {', '.join(VARIANT_TAGS)}")
        object.__setattr__(self, "tag", tag)
        if self.omega0 < 0:
            raise ValueError("omega0 must be >= 0")
        for name in ("sigma1", "eps1", "eps2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def has_block_preconditioner(self) -> bool:
        return self.tag in ("v", "vi")

    def __str__(self):
        return self.tag


def as_variant(v) -> ScalingVariant:
    return v if isinstance(v, ScalingVariant) else ScalingVariant(str(v))


# -- symbolic factors -----------------------------------------------------------

@dataclass(frozen=True)
class Factor:
    scalar: complex = 1.0
    power: Fraction = Fraction(0)
    values: np.ndarray | None = None

    def vals(self, n):
        return np.ones(n, dtype=complex) if self.values is None else self.values


ONE = Factor()


def _mono(scalar, power: Fraction, x: float):
    """Evaluate ``scalar * x**power``; ``None`` if unbounded at ``x = 0``."""
    if power == 0:
        return complex(scalar)
    if x == 0:
        return 0j if power > 0 else None
    return complex(scalar) * x ** float(power)


def _safe_inv_sqrt(z):
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = 1.0 / np.sqrt(z[nz])
    return out


def _safe_inv(z):
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = 1.0 / z[nz]
    return out


def _materials(sys: TwoBlockSystem, variant: ScalingVariant):
    s1 = sys.sigma1 if variant.sigma1 is None else np.full(sys.n1, variant.sigma1)
    e1 = sys.eps1 if variant.eps1 is None else np.full(sys.n1, variant.eps1)
    e2 = sys.eps2 if variant.eps2 is None else np.full(sys.n2, variant.eps2)
    return np.asarray(s1, float), np.asarray(e1, float), np.asarray(e2, float)


def _factors(sys: TwoBlockSystem, variant: ScalingVariant, x: float, u: complex):
    """Return ``(a1, a2, b1, b2)``.

    Unknowns whose material combination vanishes (e.g. voltage-source
    currents in MNA) are left unscaled by the material variants.
    """
    tag = variant.tag
    half = Fraction(-1, 2)
    if tag == "orig":
        return ONE, ONE, ONE, ONE
    if tag == "i":
        f = Factor(power=half)
        return ONE, f, ONE, f
    if tag == "ii":
        return ONE, Factor(power=Fraction(-1)), ONE, ONE
    if tag in ("iii", "iv"):
        s1, e1, e2 = _materials(sys, variant)
        if np.any(e2 <= 0):
            raise ValueError("insulator permittivity must be positive")
        z1 = s1 + u * x * e1
        if tag == "iii":
            a1 = Factor(values=_safe_inv_sqrt(z1))
            a2 = Factor(power=half, values=1.0 / np.sqrt(u * e2))
            return a1, a2, a1, a2
        return (Factor(values=_safe_inv(z1)), Factor(power=Fraction(-1), values=1.0 / (u * e2)),
                ONE, ONE)
    if tag in ("jacobi-l", "jacobi-s"):
        d1 = sys.K11.diagonal() + u * x * sys.M11.diagonal()
        d2 = u * sys.M22.diagonal()
        for d, offset in ((d1, 0), (d2, sys.n1)):
            zero = np.flatnonzero(d == 0)
            if zero.size:
                raise ZeroDiagonal(int(zero[0]) + offset)
        if tag == "jacobi-l":
            return (Factor(values=1.0 / d1), Factor(power=Fraction(-1), values=1.0 / d2),
                    ONE, ONE)
        a1 = Factor(values=1.0 / np.sqrt(d1))
        a2 = Factor(power=half, values=1.0 / np.sqrt(d2))
        return a1, a2, a1, a2
    # v / vi: lower block row divided by u*x analytically, the rest is a preconditioner
    return ONE, Factor(scalar=1.0 / u, power=Fraction(-1)), ONE, ONE


@dataclass(frozen=True)
class BlockCoefficients:
    """Scalar block multipliers (``None`` = unbounded at ``x = 0``) plus per-unknown diagonals.

    The operator block ``(k, l)`` is ``c_kl * diag(a_k) B_kl diag(b_l)``
    with ``a_k``/``b_l`` the diagonal arrays below.
    """

    K11: complex
    M11: complex
    M12: complex
    M21: complex
    M22: complex
    r1: complex | None
    r2: complex | None
    r1_lift: complex | None
    r2_lift: complex | None
    b1: complex | None
    b2: complex | None
    a1: np.ndarray = field(repr=False, default=None)
    a2: np.ndarray = field(repr=False, default=None)
    b1_diag: np.ndarray = field(repr=False, default=None)
    b2_diag: np.ndarray = field(repr=False, default=None)
    b2_power: Fraction = Fraction(0)

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("K11", "M11", "M12", "M21", "M22", "r1", "r2", "r1_lift", "r2_lift")}


def _coefficients(sys, variant, x, u) -> BlockCoefficients:
    a1, a2, b1, b2 = _factors(sys, variant, x, u)

    def c(extra_scalar, extra_power, f, g=ONE):
        # single complex product f.scalar * g.scalar keeps c12 == c21 bitwise
        return _mono(extra_scalar * (f.scalar * g.scalar), extra_power + f.power + g.power, x)

    one = Fraction(1)
    zero = Fraction(0)
    return BlockCoefficients(
        K11=c(1.0, zero, a1, b1),
        M11=c(u, one, a1, b1),
        M12=c(u, one, a1, b2),
        M21=c(u, one, a2, b1),
        M22=c(u, one, a2, b2),
        r1=c(1.0, zero, a1),
        r2=c(1.0, zero, a2),
        r1_lift=c(u, one, a1),
        r2_lift=c(u, one, a2),
        b1=c(1.0, zero, b1),
        b2=c(1.0, zero, b2),
        a1=a1.vals(sys.n1), a2=a2.vals(sys.n2),
        b1_diag=b1.vals(sys.n1), b2_diag=b2.vals(sys.n2),
        b2_power=b2.power,
    )


def effective_coefficients(variant, omega: float, sys: TwoBlockSystem | None = None,
                           time_domain: bool = False) -> BlockCoefficients:
    """Block coefficient table at ``omega`` (or at ``1/dt`` with ``time_domain=True``).

    ``sys`` is only needed by the material and Jacobi variants.
    """
    variant = as_variant(variant)
    if omega < 0:
        raise ValueError("omega must be >= 0")
    if sys is None:
        if variant.tag in ("iii", "iv") and None in (variant.sigma1, variant.eps1, variant.eps2):
            raise ValueError("material variants need sys or scalar sigma1/eps1/eps2")
        if variant.tag.startswith("jacobi"):
            raise ValueError("Jacobi variants need the assembled system")
        sys = _scalar_probe
    return _coefficients(sys, variant, omega, 1.0 if time_domain else 1j)


class _ScalarProbe:
    n1 = n2 = 1
    sigma1 = eps1 = eps2 = np.ones(1)


_scalar_probe = _ScalarProbe()


# -- assembly of the scaled operator --------------------------------------------

def _scale_block(B: ComplexSparseMatrix, rowv, colv, c, row0=0, col0=0):
    """``c * diag(rowv) B diag(colv)``; ``row0``/``col0`` place the block globally.

    Complex products are not bitwise commutative in NumPy, so each weight
    is formed with the factor of the smaller global index first; mirrored
    entries then see identical operations and symmetry is exact.
    """
    if c == 0 or B.nnz == 0:
        return None if B.nnz == 0 or c == 0 else B
    r = B.row_ids()
    k = B.col_indices
    rv, cv = rowv[r], colv[k]
    w = np.where(r + row0 <= k + col0, rv * cv, cv * rv)
    return ComplexSparseMatrix(B.nrows, B.ncols, B.row_offsets, B.col_indices,
                               B.values * w * c)


def _blocks(sys, co, with_k=True):
    z11 = ComplexSparseMatrix.from_scipy(
        ComplexSparseMatrix.identity(sys.n1).to_scipy() * 0)

    def add(p, q):
        if p is None:
            return q
        if q is None:
            return p
        return p + q

    b11 = add(_scale_block(sys.K11, co.a1, co.b1_diag, co.K11) if with_k else None,
              _scale_block(sys.M11, co.a1, co.b1_diag, co.M11))
    b12 = _scale_block(sys.M12, co.a1, co.b2_diag, co.M12, 0, sys.n1)
    b21 = _scale_block(sys.M21, co.a2, co.b1_diag, co.M21, sys.n1, 0)
    b22 = _scale_block(sys.M22, co.a2, co.b2_diag, co.M22)
    blocks = [[b11, b12], [b21, b22]]
    # bmat needs a concrete block in every block row/column to infer shapes
    if blocks[0][0] is None:
        blocks[0][0] = z11
    if blocks[1][1] is None:
        blocks[1][1] = ComplexSparseMatrix.from_scipy(
            ComplexSparseMatrix.identity(sys.n2).to_scipy() * 0)
    if sys.n1 == 0:
        return blocks[1][1]
    if sys.n2 == 0:
        return blocks[0][0]
    return bmat(blocks)


def _scaled_rhs(sys, co, r1, r2, l1, l2, what="source"):
    def part(coef, vec, block):
        if coef is None:
            if np.any(vec != 0):
                raise IncompatibleSource(
                    f"block-{block} {what} must vanish at the static limit for this scaling "
                    "(insulator sources must be divergence-free in the stationary limit)")
            return np.zeros_like(vec)
        return coef * vec

    top = co.a1 * (part(co.r1, r1, 1) + part(co.r1_lift, l1, 1))
    bot = co.a2 * (part(co.r2, r2, 2) + part(co.r2_lift, l2, 2))
    return np.concatenate([top, bot])


@dataclass(frozen=True)
class Recovery:
    """Per-block multipliers mapping scaled unknowns back: ``phi_k = b_k xi_k``."""

    b1: np.ndarray
    b2: np.ndarray | _UndefinedType
    recoverable_at_zero: bool
    n1: int


@dataclass(frozen=True, eq=False)
class ScaledSystem:
    A: ComplexSparseMatrix
    rhs: np.ndarray
    recovery: Recovery
    variant: ScalingVariant
    coefficients: BlockCoefficients
    x: float
    time_domain: bool = False
    preconditioner: object = None
    mass_part: ComplexSparseMatrix | None = None


def _recovery(co: BlockCoefficients, n1: int) -> Recovery:
    b1 = co.b1 * co.b1_diag
    b2 = Undefined if co.b2 is None else co.b2 * co.b2_diag
    return Recovery(b1=b1, b2=b2, recoverable_at_zero=co.b2_power >= 0, n1=n1)


def _build(sys: TwoBlockSystem, variant: ScalingVariant, x: float, u: complex,
           rhs_parts, keep_mass=False) -> ScaledSystem:
    co = _coefficients(sys, variant, x, u)
    A = _blocks(sys, co)
    rhs = _scaled_rhs(sys, co, *rhs_parts)
    pre = None
    if variant.has_block_preconditioner:
        xt = x if variant.tag == "v" else variant.omega0
        pre = build_block_preconditioner(sys, variant, x, exact=variant.exact_blocks, u=u,
                                         shift=xt)
    mass = _blocks(sys, co, with_k=False) if keep_mass else None
    return ScaledSystem(A=A, rhs=rhs, recovery=_recovery(co, sys.n1), variant=variant,
                        coefficients=co, x=x, time_domain=(u == 1.0),
                        preconditioner=pre, mass_part=mass)


def scale_system(sys: TwoBlockSystem, variant, omega: float, g=None) -> ScaledSystem:
    """Scaled frequency-domain system at angular frequency ``omega`` (block order).

    The returned matrix is ordered ``[I1; I2]``; use
    :meth:`TwoBlockSystem.to_global_order` on recovered vectors.
    """
    variant = as_variant(variant)
    if omega < 0:
        raise ValueError("omega must be >= 0")
    return _build(sys, variant, float(omega), 1j, sys.rhs_parts(g))


# -- block preconditioners -------------------------------------------------------

def _floating_conductors(K11: ComplexSparseMatrix, rtol=1e-12):
    """Connected pieces of the conductor block whose rows all sum to ~0."""
    if K11.nrows == 0:
        return []
    S = K11.to_scipy()
    pattern = abs(S) > 0
    ncomp, labels = csgraph.connected_components(pattern, directed=False)
    rowsum = np.abs(np.asarray(S.sum(axis=1)).ravel())
    diag = np.abs(K11.diagonal())
    floating = []
    for c in range(ncomp):
        idx = labels == c
        if np.all(rowsum[idx] <= rtol * np.maximum(diag[idx], np.finfo(float).tiny)):
            floating.append(np.flatnonzero(idx))
    return floating


@dataclass(frozen=True, eq=False)
class BlockPreconditioner:
    """Block-diagonal left preconditioner ``P = diag(K11 + u*s*M11, M22)``.

    ``solve`` applies ``P^-1`` (exactly with LU, approximately with ILU(0)),
    ``matvec`` applies the operator the solves invert (``P`` itself for LU,
    ``L U`` for ILU(0)); the transposed versions serve condition estimates.
    """

    n1: int
    upper: object
    lower: object
    upper_mat: ComplexSparseMatrix
    lower_mat: ComplexSparseMatrix
    exact: bool
    shift: float

    def _split(self, v):
        v = np.asarray(v, dtype=complex)
        return v[:self.n1], v[self.n1:]

    @staticmethod
    def _solve(f, v, trans):
        if isinstance(f, LuFactorization):
            return f.solve(v, trans=trans)
        return f.solve_T(v) if trans == "T" else f.solve(v)

    def _mul(self, f, mat, v, trans):
        if isinstance(f, LuFactorization):
            return (mat.T if trans == "T" else mat) @ v
        return f.matvec_T(v) if trans == "T" else f.matvec(v)

    def solve(self, v, trans="N"):
        v1, v2 = self._split(v)
        parts = [self._solve(self.upper, v1, trans) if self.n1 else v1,
                 self._solve(self.lower, v2, trans) if v2.size else v2]
        return np.concatenate(parts)

    def matvec(self, v, trans="N"):
        v1, v2 = self._split(v)
        parts = [self._mul(self.upper, self.upper_mat, v1, trans) if self.n1 else v1,
                 self._mul(self.lower, self.lower_mat, v2, trans) if v2.size else v2]
        return np.concatenate(parts)

    __call__ = solve


def build_block_preconditioner(sys: TwoBlockSystem, variant, omega: float, *,
                               exact: bool = False, u: complex = 1j,
                               shift: float | None = None) -> BlockPreconditioner:
    """Block inverse for variants ``v`` (shift = omega) and ``vi`` (shift = omega0).

    With ``u = 1`` (time domain) the shift multiplies ``M11`` directly, i.e.
    it plays the role of ``1/dt``.  The lower block needs only ``M22``
    because the ``1/(u*omega)`` factor is already folded into the scaled
    matrix.
    """
    variant = as_variant(variant)
    if not variant.has_block_preconditioner:
        raise ValueError("block preconditioners exist for variants v and vi only")
    if shift is None:
        shift = omega if variant.tag == "v" else variant.omega0
    upper_mat = sys.K11 + sys.M11.scaled(u * shift) if shift != 0 else sys.K11
    if shift == 0:
        floating = _floating_conductors(sys.K11)
        if floating:
            raise SingularBlock(
                f"{len(floating)} conductor piece(s) without Dirichlet contact make K11 singular "
                f"(first piece has {floating[0].size} unknowns); use a shifted variant or ground it")
    factor = (lambda m: lu_factor(m, row_scaling=True)) if exact else ilu0
    try:
        upper = factor(upper_mat) if sys.n1 else None
    except (SingularMatrix, ZeroDiagonal) as exc:
        raise SingularBlock(f"conductor block cannot be factored: {exc}") from None
    lower = factor(sys.M22) if sys.n2 else None
    return BlockPreconditioner(n1=sys.n1, upper=upper, lower=lower, upper_mat=upper_mat,
                               lower_mat=sys.M22, exact=exact, shift=shift)


# -- solution recovery and diagnostics -------------------------------------------

@dataclass(frozen=True)
class Recovered:
    phi1: np.ndarray
    phi2: np.ndarray | _UndefinedType

    @property
    def defined(self) -> bool:
        return self.phi2 is not Undefined

    def block_vector(self) -> np.ndarray:
        if not self.defined:
            raise ValueError("insulator potential is undefined at the static limit for this scaling")
        return np.concatenate([self.phi1, self.phi2])


def recover_solution(xi, recovery: Recovery) -> Recovered:
    """Undo the unknown scaling: ``phi_k = b_k xi_k``.

    Where ``b_2`` diverges (``w = 0`` for the symmetric scalings) block 2 is
    returned as :data:`Undefined` instead of a number.
    """
    xi = np.asarray(xi)
    n1 = recovery.n1
    phi1 = recovery.b1 * xi[:n1]
    phi2 = Undefined if recovery.b2 is Undefined else recovery.b2 * xi[n1:]
    return Recovered(phi1=phi1, phi2=phi2)


def scaled_condest(scaled: ScaledSystem) -> float:
    """Infinity-norm condition estimate of the (left-preconditioned) scaled operator."""
    try:
        lu = lu_factor(scaled.A, row_scaling=True)
    except SingularMatrix:
        return float("inf")
    P = scaled.preconditioner
    if P is None:
        return condest_inf(scaled.A, lu)
    A = scaled.A
    At = A.T
    return condest_operator(
        apply=lambda v: P.solve(A @ v),
        apply_T=lambda v: At @ P.solve(v, trans="T"),
        solve=lambda v: lu.solve(P.matvec(v)),
        solve_T=lambda v: P.matvec(lu.solve(v, trans="T"), trans="T"),
        n=A.nrows,
    )


def solve_scaled(scaled: ScaledSystem, solver: str = "lu", tol: float = 1e-12,
                 maxit: int = 5000, ilu: bool = False):
    """Solve a scaled system; returns ``(xi, iterations)`` (0 iterations for LU).

    With ``solver='bicgstab'`` the block preconditioner of ``v``/``vi`` is
    applied from the left, as the scaling itself is; ``ilu=True`` adds an
    ILU(0) preconditioner of the whole matrix for the other variants.
    """
    from .numkit import bicgstab

    if solver == "lu":
        return lu_factor(scaled.A, row_scaling=True).solve(scaled.rhs), 0
    if solver != "bicgstab":
        raise ValueError(f"unknown solver {solver!r}")
    P = scaled.preconditioner
    if P is not None:
        A = scaled.A
        return bicgstab(lambda v: P.solve(A @ v), P.solve(scaled.rhs), tol=tol, maxit=maxit)
    pre = ilu0(scaled.A) if ilu else None
    return bicgstab(scaled.A, scaled.rhs, tol=tol, maxit=maxit, precond=pre)
