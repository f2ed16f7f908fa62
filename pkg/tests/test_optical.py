import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patl.medium import LayeredMedium, random_medium
from patl.optical import (assemble_operator, compute_envelopes, derivative_lower_bound,
                          internal_datum, kappa_profile, make_internal_data, solve_modal_bvp)

from conftest import constant_medium

# Closed-form values for D = 1, mu_a = 3, lambda_1 = 1, lambda_2 = 2, H = 1
# (u_k = sinh(s y)/sinh(s), s^2 = 3 + lambda^2), evaluated in 30-digit arithmetic.
U1_HALF = 0.324027136831942699787488676613
U1_PRIME_TOP = 2.07462944145509619175561952954
U1_PRIME_BOTTOM = 0.551441129543566415516702964326


def node(med, y):
    i = int(round(y / med.grid.h_step))
    assert abs(med.y[i] - y) < 1e-12
    return i


def test_constant_phantom_frozen_values():
    med = constant_medium(1025)
    sol = solve_modal_bvp(med, 1)
    assert sol.lambda_k == pytest.approx(1.0)
    assert sol.u.values[node(med, 0.5)] == pytest.approx(U1_HALF, rel=1e-6)
    assert sol.u_prime.values[-1] == pytest.approx(U1_PRIME_TOP, rel=1e-5)
    assert sol.u_prime.values[0] == pytest.approx(U1_PRIME_BOTTOM, rel=1e-5)
    assert sol.u.values[0] == 0.0 and sol.u.values[-1] == pytest.approx(1.0)


def test_variable_diffusion_closed_form():
    # -(D u')' = 0 with D = (1 + y)^2: u = (1 - 1/(1+y)) / (1 - 1/2); u(0.5) = 2/3
    med = LayeredMedium.from_functions(513, 1.0, lambda y: (1 + y) ** 2, 0.0)
    sol = solve_modal_bvp(med, lam=0.0)
    exact = 2.0 * (1.0 - 1.0 / (1.0 + med.y))
    assert sol.u.values[node(med, 0.5)] == pytest.approx(2.0 / 3.0, rel=1e-5)
    np.testing.assert_allclose(sol.u.values, exact, atol=2e-6)


def test_operator_rows_are_conservative():
    med = constant_medium(9, D=2.0, mu=0.0)
    lower, diag, upper = assemble_operator(med, 0.0)
    np.testing.assert_allclose((lower + diag + upper)[1:-1], 0.0, atol=1e-14)
    assert diag[0] == 1.0 and diag[-1] == 1.0


def test_kappa_profile_closed_form():
    # sqrt D = 1 + y/2 is linear, so kappa = mu/D + lambda^2
    med = LayeredMedium.from_functions(401, 1.0, lambda y: (1 + 0.5 * y) ** 2, 3.0,
                                       width_L=2 * math.pi)
    kap = kappa_profile(med, 1)
    assert kap[-1] == pytest.approx(3.0 / 1.5**2 + 1.0, rel=1e-6)
    np.testing.assert_allclose(kap, 3.0 / (1 + 0.5 * med.y) ** 2 + 1.0, atol=1e-6)


def test_envelopes_exact_for_constant_medium():
    med = constant_medium(1025)
    sol = solve_modal_bvp(med, 1)
    np.testing.assert_allclose(sol.envelope_lo.values, sol.envelope_hi.values, atol=1e-12)
    np.testing.assert_allclose(sol.u.values, sol.envelope_lo.values, atol=1e-6)


def test_envelopes_absent_when_kappa_nonpositive():
    # (sqrt D)''/sqrt D is strongly negative for a rapidly oscillating D
    med = LayeredMedium.from_functions(401, 1.0, lambda y: (1 + 0.5 * np.sin(12 * y)) ** 2, 0.01)
    env = compute_envelopes(med, lam=0.0)
    assert env.kappa_m <= 0 and not env.valid
    sol = solve_modal_bvp(med, lam=0.0)
    assert sol.envelope_lo is None


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_envelope_sandwich_random_media(seed):
    med = random_medium(np.random.default_rng(seed), n_points=257)
    k = 0
    while compute_envelopes(med, k).kappa_m <= 0:
        k += 1
    sol = solve_modal_bvp(med, k)
    tol = 10 * med.grid.h_step**2
    assert np.all(sol.envelope_lo.values <= sol.u.values + tol)
    assert np.all(sol.u.values <= sol.envelope_hi.values + tol)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_solution_positive_and_increasing(seed):
    med = random_medium(np.random.default_rng(seed), n_points=129)
    sol = solve_modal_bvp(med, 1)
    assert np.all(sol.u.values[1:] > 0)
    assert np.all(np.diff(sol.u.values) > 0)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_derivative_bound_random_media(seed):
    med = random_medium(np.random.default_rng(seed), n_points=257)
    sol = solve_modal_bvp(med, 1)
    if sol.kappa_m > 0:
        bound = derivative_lower_bound(med, sol)
        assert bound.holds and bound.rho_min > 0


def test_derivative_bound_sharp_at_bottom_for_constant_medium():
    med = constant_medium(1025)
    bound = derivative_lower_bound(med, solve_modal_bvp(med, 1))
    assert bound.rho[0] == pytest.approx(U1_PRIME_BOTTOM, rel=1e-9)


def test_internal_data():
    med = constant_medium(257)
    d1, d2 = make_internal_data(med, 1, 2)
    np.testing.assert_allclose(d1.h.values, 3.0 * solve_modal_bvp(med, 1).u.values)
    assert d2.lambda_k == pytest.approx(2.0)
    with pytest.raises(ValueError):
        make_internal_data(med, 2, 1)
    d = internal_datum(med, solve_modal_bvp(med, 3))
    assert d.k == 3


def test_second_order_convergence():
    errs = []
    for n in (64, 128, 256):
        med = constant_medium(n + 1)
        u = solve_modal_bvp(med, 1).u.values
        errs.append(np.max(np.abs(u - np.sinh(2 * med.y) / np.sinh(2))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.1)
