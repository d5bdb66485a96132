import math

import numpy as np
import pytest

from eqstab.circuit import mna_two_block, parse_netlist
from eqstab.fem import PRESETS, build_toy_capacitor, displacement_field
from eqstab.numkit import lu_factor
from eqstab.stabilize import ScalingVariant
from eqstab.timestep import (EulerStepper, TransientConfig, condition_vs_dt, euler_system, run,
                             step)


@pytest.fixture(scope="module")
def toy():
    return build_toy_capacitor()


def test_variant_i_step_entries():
    net = parse_netlist("I I1 1 0 1\nR R1 1 0 2\nC C1 1 2 3\nC C2 2 0 5\n")
    sys = mna_two_block(net)
    dt = 0.25
    A = euler_system(sys, "i", dt).A_step.toarray()
    K11, M11, M12, M22 = (m.toarray() for m in (sys.K11, sys.M11, sys.M12, sys.M22))
    np.testing.assert_allclose(A[:1, :1], K11 + M11 / dt, rtol=1e-15)
    np.testing.assert_allclose(A[:1, 1:], M12 / math.sqrt(dt), rtol=1e-15)
    np.testing.assert_allclose(A[1:, 1:], M22, rtol=1e-15)
    assert np.all(A.imag == 0)


def test_variant_ii_unit_dt_has_no_factor():
    sys = mna_two_block(parse_netlist("I I1 1 0 1\nR R1 1 0 2\nC C1 1 2 3\nC C2 2 0 5\n"))
    A = euler_system(sys, "ii", 1.0).A_step.toarray()
    np.testing.assert_array_equal(A[1:, :], np.c_[sys.M21.toarray(), sys.M22.toarray()])


def test_zero_state_stays_zero(toy):
    cfg = TransientConfig(dt=1e-3, t_end=3e-3, variant="iv")
    zero = np.zeros(toy.bc.values.size)
    st = run(toy.sys, cfg, lambda t: zero)
    assert np.all(st.phi == 0)


def test_step_equivalence_original_vs_i(toy):
    dt = 1e-3
    g0 = toy.bc.values * 0.3
    g1 = toy.bc.values * 0.7
    outs = {}
    for v in ("orig", "i"):
        stp = EulerStepper(toy.sys, TransientConfig(dt=dt, t_end=dt, variant=v))
        st = stp.initial_state(g0)
        outs[v] = step(st, stp, g1)
    n1 = toy.sys.n1
    ref = outs["orig"].phi
    np.testing.assert_allclose(outs["i"].phi, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
    np.testing.assert_allclose(outs["i"].xi[n1:] * math.sqrt(dt), ref[n1:], rtol=1e-10,
                               atol=1e-10 * np.abs(ref).max())


def test_factorization_reuse_matches_refactorization(toy):
    cfg = TransientConfig(dt=1e-3, t_end=2e-3, variant="iii")
    stp = EulerStepper(toy.sys, cfg)
    st = stp.initial_state(toy.bc.values * 0.1)
    st1 = step(st, stp, toy.bc.values * 0.4)
    e = euler_system(toy.sys, "iii", 1e-3)
    rhs = e.B_prev @ st.xi + e.rhs(toy.bc.values * 0.4, toy.bc.values * 0.1)
    fresh = lu_factor(e.A_step, row_scaling=True).solve(rhs)
    np.testing.assert_array_equal(st1.xi, fresh)


def test_constant_bc_converges_to_static():
    net = parse_netlist("I I1 1 0 1\nR R1 1 0 2\nR R2 1 2 1\nC C1 2 3 1e-3\nC C2 3 0 1e-3\n")
    sys = mna_two_block(net)
    cfg = TransientConfig(dt=1e-3, t_end=0.2, variant="iv")
    phi0 = np.zeros(sys.ndof)
    st = run(sys, cfg, lambda t: np.zeros(0), phi0=phi0)
    static = EulerStepper(sys, cfg).initial_state(np.zeros(0)).phi
    # the capacitive node settles where no current flows through the capacitors
    assert np.abs(st.phi[:sys.n1] - static[:sys.n1]).max() <= 1e-8 * np.abs(static).max()


def test_energy_non_increasing():
    net = parse_netlist("R R1 1 0 2\nC C1 1 2 1e-3\nC C2 2 0 2e-3\nR R2 3 0 1\nC C3 3 2 1e-3\n")
    sys = mna_two_block(net)
    cfg = TransientConfig(dt=1e-3, t_end=0.05, variant="iii")
    M = sys.original_matrix(1.0).toarray() - sys.original_matrix(0.0).toarray()
    phi0 = np.array([1.0, -0.5, 0.3])
    energies = []
    run(sys, cfg, lambda t: np.zeros(0), phi0=phi0,
        sample=lambda s: energies.append(float(np.real(np.conj(s.phi) @ M @ s.phi))))
    assert np.all(np.diff(energies) <= 1e-15 * energies[0])


def test_toy_transient_peak_displacement(toy):
    cfg_t = PRESETS["toy-capacitor"]
    profile = toy.bc.values
    cfg = TransientConfig(dt=1e-3, t_end=5e-3, variant="iv")
    st = run(toy.sys, cfg, lambda t: profile * math.sin(cfg_t.omega * t))
    D = displacement_field(toy.mesh, toy.materials, toy.nodal(st.phi, st.g).real)
    assert np.ptp(D) / D.mean() < 1e-6
    assert D.mean() == pytest.approx(cfg_t.analytic_D(), rel=1e-3)


def test_condition_vs_dt_sentinel_and_static(toy):
    rows = condition_vs_dt(toy.sys, ["orig", "iv"], [1e-3], include_static=True)
    assert rows[-1][0] == math.inf
    assert rows[-1][1]["orig"] == math.inf
    assert math.isfinite(rows[-1][1]["iv"])
    with pytest.raises(ValueError):
        condition_vs_dt(toy.sys, ["orig"], [0.0])


def test_config_validation():
    with pytest.raises(ValueError):
        TransientConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        TransientConfig(dt=1.0, t_end=-1.0)
    assert TransientConfig(dt=1e-3, t_end=5e-3).n_steps == 5
    assert isinstance(TransientConfig(dt=1, t_end=1, variant="vi").variant, ScalingVariant)
