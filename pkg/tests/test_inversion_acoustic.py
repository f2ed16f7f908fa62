import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patl.acoustic import (ModalInitialData, default_dt, observability_constants,
                           simulate_modal_wave)
from patl.errors import HypothesisViolation, StructuralError
from patl.inversion_acoustic import (TraceOperator, certify_finite_fourier,
                                     certify_observability, cgls, h_half_boundary_term,
                                     holder_one_side_bound, minimize_linear_plus_inverse_square,
                                     recover_modal_initial_data)
from patl.acoustic import ModalWaveOperator
from patl.medium import CoefficientProfile, random_medium, wavenumber

from conftest import constant_medium


def init_for(med, k=1, a=1.0):
    g = med.grid
    f0 = CoefficientProfile.from_function(g, lambda y: a * np.sin(np.pi * y) ** 2 * y)
    f1 = CoefficientProfile.from_function(g, lambda y: a * y * (1 - y) * np.cos(3 * y))
    return ModalInitialData(k, f0, f1)


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_cgls_solves_small_dense_problem(rng):
    A = rng.normal(size=(30, 10))
    b = rng.normal(size=30)
    x, its, _, ok = cgls(lambda v: A @ v, lambda v: A.T @ v, b, 10, tol=1e-12, max_iter=100)
    np.testing.assert_allclose(x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-9)
    assert ok and its <= 30


def test_cgls_tikhonov_with_mass(rng):
    A = rng.normal(size=(20, 8))
    b = rng.normal(size=20)
    S = rng.uniform(0.5, 2.0, 8)
    eps = 0.3
    x, _, _, _ = cgls(lambda v: A @ v, lambda v: A.T @ v, b, 8, damp=eps, mass=S,
                      precondition=lambda v: v / (1.0 + S), tol=1e-13, max_iter=200)
    np.testing.assert_allclose(x, np.linalg.solve(A.T @ A + eps * np.diag(S), A.T @ b), atol=1e-9)


def test_cgls_zero_data():
    x, its, r, ok = cgls(lambda v: v, lambda v: v, np.zeros(4), 4)
    assert its == 0 and r == 0.0 and ok and not x.any()


def test_trace_operator_adjoint(rng):
    med = constant_medium(65, c=lambda y: 1 + 0.3 * y)
    A = TraceOperator(ModalWaveOperator(med, 1.0, 0.8, 3.0))
    x = rng.normal(size=2 * A.m)
    r = rng.normal(size=2 * len(A.tw))
    assert abs(A.matvec(x) @ r - x @ A.rmatvec(r)) < 1e-11 * np.linalg.norm(x) * np.linalg.norm(r)


@pytest.mark.parametrize("k", [0, 1, 3])
def test_round_trip_small_grid(k):
    med = constant_medium(129, c=lambda y: 1 + 0.2 * y)
    init = init_for(med, k)
    T = 4.0 * observability_constants(med, 1.0).theta
    tr = simulate_modal_wave(med, init, T).trace
    res = recover_modal_initial_data(med, tr, 1.0, T)
    assert res.converged
    assert rel_l2(res.f0_rec.values, init.f0.values) < 1e-5
    assert rel_l2(res.f1_rec.values, init.f1.values) < 1e-4


def test_recovery_warns_below_observation_time():
    med = constant_medium(65)
    tr = simulate_modal_wave(med, init_for(med), 1.5).trace
    with pytest.warns(RuntimeWarning):
        recover_modal_initial_data(med, tr, 1.0, 1.5, max_iter=5)


def test_recovery_rejects_mismatched_trace():
    med = constant_medium(65)
    tr = simulate_modal_wave(med, init_for(med), 3.0).trace
    with pytest.raises(StructuralError):
        recover_modal_initial_data(med, tr, 1.0, 2.5)


def test_discrepancy_stopping_with_noise():
    med = constant_medium(129)
    init = init_for(med)
    tr = simulate_modal_wave(med, init, 4.0).trace
    r = np.random.default_rng(1)
    sigma = 1e-3
    noisy = type(tr)(tr.k, tr.dt, tr.samples_p + sigma * r.normal(size=len(tr.samples_p)),
                     tr.samples_pt + sigma * r.normal(size=len(tr.samples_p)), tr.T_final)
    stopped = recover_modal_initial_data(med, noisy, 1.0, 4.0, noise_rms=sigma)
    full = recover_modal_initial_data(med, noisy, 1.0, 4.0, max_iter=300)
    assert stopped.iterations < full.iterations
    assert rel_l2(stopped.f0_rec.values, init.f0.values) < 0.05


@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.1, 1.0]), k=st.integers(1, 3))
@settings(max_examples=10, deadline=None)
def test_observability_certificate_random(seed, beta, k):
    med = random_medium(np.random.default_rng(seed), n_points=65, c_range=(0.5, 2.0))
    init = init_for(med, k)
    T = 3 * observability_constants(med, beta).theta * med.H
    cert = certify_observability(med, init, simulate_modal_wave(med, init, T, beta=beta).trace,
                                 beta, T)
    assert cert.valid and cert.rhs > 0


def test_observability_certificate_scales_quadratically():
    med = constant_medium(65)
    T = 3.0
    c1 = certify_observability(med, init_for(med), simulate_modal_wave(
        med, init_for(med), T).trace, 1.0, T)
    c2 = certify_observability(med, init_for(med, a=3.0), simulate_modal_wave(
        med, init_for(med, a=3.0), T).trace, 1.0, T)
    assert c2.rhs == pytest.approx(9 * c1.rhs, rel=1e-12)
    assert c2.lhs_grad == pytest.approx(9 * c1.lhs_grad, rel=1e-12)


def test_certificate_requires_long_window():
    med = constant_medium(65)
    tr = simulate_modal_wave(med, init_for(med), 1.5).trace
    with pytest.raises(HypothesisViolation):
        certify_observability(med, init_for(med), tr, 1.0, 1.5)


def test_finite_fourier_sums_modes():
    med = constant_medium(65)
    inits = [init_for(med, k) for k in (0, 1, 2)]
    dt = default_dt(med, wavenumber(2, med.width_L))
    trs = [simulate_modal_wave(med, i, 3.0, dt).trace for i in inits]
    cert = certify_finite_fourier(med, inits, trs, 1.0, 3.0)
    assert cert.valid
    assert cert.rhs == pytest.approx(sum(c.rhs for c in cert.modal), rel=1e-12)
    with pytest.raises(StructuralError):
        certify_finite_fourier(med, inits, trs[:2], 1.0, 3.0)


def test_linear_plus_inverse_square_minimum():
    # a lam + b / lam^2 is minimised at lam = (2 b / a)^(1/3)
    lam, val = minimize_linear_plus_inverse_square(1.0, 2.0)
    assert lam == pytest.approx(4 ** (1 / 3))
    assert val == pytest.approx(4 ** (1 / 3) + 2.0 / 4 ** (2 / 3))
    assert 3 * 2 ** (-2 / 3) == pytest.approx(1.889881574843)


@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
@settings(max_examples=50, deadline=None)
def test_linear_plus_inverse_square_is_minimum(a, b):
    lam, val = minimize_linear_plus_inverse_square(a, b)
    for f in (0.9, 1.1):
        assert a * lam * f + b / (lam * f) ** 2 >= val * (1 - 1e-12)


def test_h_half_term():
    med = constant_medium(65)
    tr = simulate_modal_wave(med, init_for(med, 2), 3.0).trace
    expect = math.sqrt(1 + wavenumber(2, med.width_L) ** 2) * tr.integral_p2()
    assert h_half_boundary_term([tr], med.width_L) == pytest.approx(expect)


def test_holder_bound_properties():
    med = constant_medium(65)
    inits = [init_for(med, k) for k in (1, 2)]
    trs = [simulate_modal_wave(med, i, 3.0).trace for i in inits]
    hb = holder_one_side_bound(med, trs, 1.0, 3.0, 5.0, inits)
    # lam_N B + M^2/lam_{N+1}^2 undercuts the continuous optimum by at most (lam_{N+1} - lam_N) B
    gap = wavenumber(1, med.width_L) * hb.boundary_term
    assert hb.discrete_min >= hb.continuous_min - gap - 1e-12
    assert hb.majorizes and hb.closed_form_bound >= hb.continuous_min
    assert hb.valid
    L = med.width_L
    direct = min(hb.velocity_term + wavenumber(N, L) * hb.boundary_term
                 + 25.0 / wavenumber(N + 1, L) ** 2 for N in range(200))
    assert hb.discrete_min == pytest.approx(direct)
    zero = holder_one_side_bound(med, trs, 1.0, 3.0, 0.0)
    assert zero.discrete_min == pytest.approx(hb.velocity_term)
    with pytest.raises(ValueError):
        holder_one_side_bound(med, trs, 1.0, 3.0, -1.0)
