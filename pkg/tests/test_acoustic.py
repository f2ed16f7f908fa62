import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patl.acoustic import (CFL_SAFETY, ModalInitialData, ModalWaveOperator, initial_energy,
                           max_stable_dt, n_time_steps, observability_constants,
                           simulate_modal_wave, verify_continuity_bound)
from patl.errors import CFLViolation, NumericalError, StructuralError
from patl.medium import CoefficientProfile, Grid1D, random_medium

from conftest import constant_medium

EIGEN_ENERGY = 1.23370055013616982735431137498  # pi^2 / 8


def eigen_init(med):
    f0 = CoefficientProfile.from_function(med.grid, lambda y: np.sin(np.pi * y / 2))
    return ModalInitialData(0, f0, CoefficientProfile.constant(med.grid, 0.0))


def smooth_init(med, k=1, with_velocity=True):
    g = med.grid
    f0 = CoefficientProfile.from_function(g, lambda y: np.sin(np.pi * y) ** 2 * y)
    f1 = CoefficientProfile.from_function(
        g, (lambda y: y * (1 - y) * np.cos(3 * y)) if with_velocity else (lambda y: 0 * y))
    return ModalInitialData(k, f0, f1)


def test_initial_data_must_vanish_at_bottom():
    g = Grid1D(9, 1.0)
    with pytest.raises(ValueError):
        ModalInitialData(0, CoefficientProfile.constant(g, 1.0), CoefficientProfile.constant(g, 0.0))
    with pytest.raises(StructuralError):
        ModalInitialData(0, CoefficientProfile.constant(g, 0.0),
                         CoefficientProfile.constant(Grid1D(5, 1.0), 0.0))


def test_eigenmode_energy_frozen():
    med = constant_medium(1025)
    assert initial_energy(med, eigen_init(med)) == pytest.approx(EIGEN_ENERGY, rel=1e-5)


def test_eigenmode_trace():
    med = constant_medium(513)
    sim = simulate_modal_wave(med, eigen_init(med), 4.0, beta=0.0)
    t = sim.trace.times
    np.testing.assert_allclose(sim.trace.samples_p, np.cos(np.pi * t / 2), atol=2e-5)
    np.testing.assert_allclose(sim.trace.samples_pt, -np.pi / 2 * np.sin(np.pi * t / 2), atol=1e-4)


def test_cfl_default_and_violation():
    med = constant_medium(101, c=2.0)
    dt_max = max_stable_dt(med, 0.0)
    assert dt_max == pytest.approx(0.01 / 2.0)
    op = ModalWaveOperator(med, 0.0, 1.0, 1.0)
    assert op.dt == pytest.approx(CFL_SAFETY * dt_max)
    with pytest.raises(CFLViolation):
        ModalWaveOperator(med, 0.0, 1.0, 1.0, dt=1.01 * dt_max)


def test_step_count():
    assert n_time_steps(1.0, 0.1) == 10
    assert n_time_steps(1.0, 0.3) == 3


def test_blowup_is_reported():
    # beyond the stability limit the scheme explodes; the guard turns that into an error
    med = constant_medium(65)
    op = ModalWaveOperator(med, 0.0, 0.0, 2000.0)
    op.dt = 3.0 * max_stable_dt(med, 0.0)
    op.nsteps = n_time_steps(op.T, op.dt)
    x = np.random.default_rng(0).normal(size=op.size)
    with pytest.raises(NumericalError):
        op.run(x, x)


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 3.0), k=st.integers(0, 3))
@settings(max_examples=20, deadline=None)
def test_energy_balance_random(seed, beta, k):
    med = random_medium(np.random.default_rng(seed), n_points=65)
    sim = simulate_modal_wave(med, smooth_init(med, k), 3.0, beta=beta)
    en = sim.energy
    # from the first half step the discrete balance is exact up to round-off
    bal = np.abs(en.energy[1] - en.energy[1:] - (en.boundary_dissipation[1:]
                                                 - en.boundary_dissipation[1]))
    assert bal.max() <= 1e-10 * en.energy[1]
    assert np.all(np.diff(en.energy[1:]) <= 1e-12 * en.energy[1])


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 2.0), k=st.integers(0, 3))
@settings(max_examples=15, deadline=None)
def test_adjoint_identity_random(seed, beta, k):
    r = np.random.default_rng(seed)
    med = random_medium(r, n_points=33)
    op = ModalWaveOperator(med, 2 * math.pi * k / med.width_L, beta, 2.5)
    f0, f1 = r.normal(size=op.size), r.normal(size=op.size)
    gp, gv = r.normal(size=op.nsteps + 1), r.normal(size=op.nsteps + 1)
    p, pt = op.forward(f0, f1)
    a0, a1 = op.adjoint(gp, gv)
    lhs = p @ gp + pt @ gv
    rhs = f0 @ a0 + f1 @ a1
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0) * 10


def test_forward_is_linear(rng):
    med = constant_medium(65, c=lambda y: 1 + 0.2 * y)
    op = ModalWaveOperator(med, 1.0, 0.5, 2.0)
    x0, x1, y0, y1 = (rng.normal(size=op.size) for _ in range(4))
    pa, qa = op.forward(x0, x1)
    pb, qb = op.forward(y0, y1)
    pc, qc = op.forward(2 * x0 - y0, 2 * x1 - y1)
    np.testing.assert_allclose(pc, 2 * pa - pb, atol=1e-12)
    np.testing.assert_allclose(qc, 2 * qa - qb, atol=1e-12)


def test_constants_for_unit_speed():
    # c = 1, H = 1, beta = 1: theta = 1, C_M = H (c^-2(H) + beta^2) = 2, C_m1 = (1 + 2*1)/2,
    # C_m2 = 1/2, C_m3 = (1 + 2)/2
    c = observability_constants(constant_medium(129), 1.0)
    assert (c.theta, c.T_min) == (1.0, 2.0)
    assert c.C_M == pytest.approx(2.0)
    assert c.C_m1 == pytest.approx(1.5)
    assert c.C_m2 == pytest.approx(0.5)
    assert c.C_m3 == pytest.approx(1.5)
    assert c.factor(4.0, 1.0) == pytest.approx(2.0)
    assert c.factor(2.0, 1.0) == math.inf


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.1, 2.0), k=st.integers(0, 3))
@settings(max_examples=15, deadline=None)
def test_continuity_bound_random(seed, beta, k):
    med = random_medium(np.random.default_rng(seed), n_points=65)
    init = smooth_init(med, k)
    T = 3.0
    sim = simulate_modal_wave(med, init, T, beta=beta)
    chk = verify_continuity_bound(med, sim.trace, init, observability_constants(med, beta), beta, T)
    assert chk.margin >= 0


def test_field_storage_and_times():
    med = constant_medium(33)
    sim = simulate_modal_wave(med, smooth_init(med), 1.0, store_field=True)
    assert sim.field.shape == (len(sim.trace.samples_p), 33)
    np.testing.assert_allclose(sim.field[:, -1], sim.trace.samples_p)
    np.testing.assert_allclose(sim.field[0], smooth_init(med).f0.values)
    assert sim.trace.times[-1] <= 1.0 + 1e-12


def test_grid_mismatch_rejected():
    med = constant_medium(33)
    with pytest.raises(StructuralError):
        simulate_modal_wave(med, smooth_init(constant_medium(17)), 1.0)
