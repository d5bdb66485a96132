"""Scaled implicit-Euler time stepping of the two-block system.

One step solves

    (K + M/dt) phi_{l+1} = M/dt phi_l + src - KD g_{l+1} - MD (g_{l+1} - g_l)/dt

after the same row/unknown scaling as in the frequency domain, with
``jw`` replaced by ``1/dt``.  All coefficients are then real; complex
storage is kept so that one code path serves both domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import TwoBlockSystem
from .numkit import SingularMatrix, bicgstab, ilu0, lu_factor
from .stabilize import (ScaledSystem, ScalingVariant, _build, _scaled_rhs, as_variant,
                        recover_solution, scale_system, scaled_condest)


def _x(dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return 0.0 if math.isinf(dt) else 1.0 / dt


@dataclass(frozen=True, eq=False)
class EulerSystem:
    """``A_step xi_{l+1} = B_prev xi_l + rhs(g_{l+1}, g_l)`` in block order."""

    scaled: ScaledSystem
    sys: TwoBlockSystem
    dt: float

    @property
    def A_step(self):
        return self.scaled.A

    @property
    def B_prev(self):
        return self.scaled.mass_part

    def rhs(self, g_next=None, g_prev=None, src=None) -> np.ndarray:
        """Scaled source and Dirichlet lifting for the step ending at ``g_next``.

        ``src`` optionally replaces the stored volume source ``(src1, src2)``.
        """
        sys = self.sys
        r1, r2, l1, l2 = sys.rhs_parts(g_next, g_prev if g_prev is not None else g_next)
        if src is not None:
            s1, s2 = src
            r1 = r1 - sys.src1 + s1
            r2 = np.asarray(s2, dtype=complex)
        return _scaled_rhs(sys, self.scaled.coefficients, r1, r2, l1, l2)


def euler_system(sys: TwoBlockSystem, variant, dt: float) -> EulerSystem:
    """Step matrix, previous-state multiplier and rhs scaling for one implicit Euler step.

    ``dt = inf`` gives the static limit, evaluated through the same exact
    power cancellation as ``w = 0``.
    """
    variant = as_variant(variant)
    x = _x(dt)
    zeros = (np.zeros(sys.n1, complex), np.zeros(sys.n2, complex),
             np.zeros(sys.n1, complex), np.zeros(sys.n2, complex))
    scaled = _build(sys, variant, x, 1.0, zeros, keep_mass=True)
    return EulerSystem(scaled=scaled, sys=sys, dt=dt)


@dataclass(frozen=True)
class TransientConfig:
    dt: float
    t_end: float
    variant: ScalingVariant | str = "iv"
    t0: float = 0.0
    solver: str = "lu"
    tol: float = 1e-12
    maxit: int = 5000
    ilu: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.t_end < self.t0:
            raise ValueError("t_end must not precede t0")
        object.__setattr__(self, "variant", as_variant(self.variant))

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))


@dataclass(eq=False)
class TransientState:
    t: float
    xi: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    history: list = field(default_factory=list)


class EulerStepper:
    """Builds the step system once and reuses its factorization for every step."""

    def __init__(self, sys: TwoBlockSystem, config: TransientConfig):
        self.sys = sys
        self.config = config
        self.euler = euler_system(sys, config.variant, config.dt)
        A = self.euler.A_step
        self._lu = None
        self._ilu = None
        if config.solver == "lu":
            self._lu = lu_factor(A, row_scaling=True)
        elif config.solver == "bicgstab":
            self._ilu = ilu0(A) if config.ilu and self.euler.scaled.preconditioner is None else None
        else:
            raise ValueError(f"unknown solver {config.solver!r}")

    @property
    def recovery(self):
        return self.euler.scaled.recovery

    def solve(self, rhs):
        if self._lu is not None:
            return self._lu.solve(rhs), 0
        A = self.euler.A_step
        P = self.euler.scaled.preconditioner
        cfg = self.config
        if P is not None:
            return bicgstab(lambda v: P.solve(A @ v), P.solve(rhs), tol=cfg.tol, maxit=cfg.maxit)
        return bicgstab(A, rhs, tol=cfg.tol, maxit=cfg.maxit, precond=self._ilu)

    def to_xi(self, phi_block):
        """Scaled unknowns for a physical state: ``xi = phi / b``."""
        rec = self.recovery
        n1 = self.sys.n1
        return np.concatenate([phi_block[:n1] / rec.b1, phi_block[n1:] / rec.b2])

    def initial_state(self, g0, phi0=None) -> TransientState:
        """Start from ``phi0`` or, by default, from the static solution for ``g0``.

        The static solve uses variant ``ii``, which keeps the original
        unknowns and stays regular at ``w = 0``.
        """
        g0 = np.asarray(g0, dtype=complex)
        if phi0 is None:
            static = _build(self.sys, ScalingVariant("ii"), 0.0, 1.0, self.sys.rhs_parts(g0))
            phi0 = lu_factor(static.A, row_scaling=True).solve(static.rhs)
        phi0 = np.asarray(phi0, dtype=complex)
        return TransientState(t=self.config.t0, xi=self.to_xi(phi0), phi=phi0, g=g0)


def step(state: TransientState, stepper: EulerStepper, g_next, src=None) -> TransientState:
    """Advance one step of size ``dt`` with Dirichlet values ``g_next`` at the new time."""
    g_next = np.asarray(g_next, dtype=complex)
    e = stepper.euler
    rhs = e.B_prev @ state.xi + e.rhs(g_next, state.g, src)
    xi, its = stepper.solve(rhs)
    phi = recover_solution(xi, stepper.recovery).block_vector()
    rnorm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(e.A_step @ xi - rhs) / rnorm) if rnorm else 0.0
    return TransientState(t=state.t + stepper.config.dt, xi=xi, phi=phi, g=g_next,
                          iterations=its, residual=res, history=state.history)


def run(sys: TwoBlockSystem, config: TransientConfig, bc, phi0=None, sample=None):
    """Integrate from ``t0`` to ``t_end``; ``bc(t)`` returns the Dirichlet values.

    ``sample(state)`` is called after the initial state and after every
    step; its return values are collected in ``state.history``.
    """
    stepper = EulerStepper(sys, config)
    state = stepper.initial_state(bc(config.t0), phi0)
    if sample is not None:
        state.history.append(sample(state))
    for k in range(1, config.n_steps + 1):
        state = step(state, stepper, bc(config.t0 + k * config.dt))
        if sample is not None:
            state.history.append(sample(state))
    return state


def condition_vs_dt(sys: TwoBlockSystem, variants, dt_grid, include_static=False):
    """``[(dt, {variant: kappa})]`` with ``inf`` for singular step matrices.

    ``include_static`` appends ``dt = inf`` (the static limit).
    """
    variants = [as_variant(v) for v in variants]
    grid = [float(d) for d in dt_grid]
    if any(not d > 0 for d in grid):
        raise ValueError("dt grid must be positive")
    if include_static:
        grid.append(math.inf)
    rows = []
    for dt in grid:
        kappas = {}
        for v in variants:
            try:
                kappas[v.tag] = scaled_condest(euler_system(sys, v, dt).scaled)
            except SingularMatrix:
                kappas[v.tag] = math.inf
        rows.append((dt, kappas))
    return rows
