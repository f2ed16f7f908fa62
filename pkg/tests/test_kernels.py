import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patl import kernels
from patl._pykernels import solve_tridiagonal as py_tridiag
from patl.acoustic import ModalWaveOperator

from conftest import constant_medium

BACKENDS = ["python"]
try:
    kernels.backend_module("cython")
    BACKENDS.append("cython")
except ImportError:  # pragma: no cover
    pass


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.backend_module("fortran")


@pytest.mark.parametrize("name", BACKENDS)
@given(n=st.integers(3, 60), seed=st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_tridiagonal_matches_dense(name, n, seed):
    r = np.random.default_rng(seed)
    lower, upper = r.uniform(-1, 1, n), r.uniform(-1, 1, n)
    diag = 2.5 + r.random(n)  # diagonally dominant
    rhs = r.normal(size=n)
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    x = kernels.backend_module(name).solve_tridiagonal(lower, diag, upper, rhs)
    np.testing.assert_allclose(A @ x, rhs, atol=1e-12)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@pytest.mark.parametrize("beta", [0.0, 0.7])
def test_backends_agree_on_wave_operator(beta, rng):
    med = constant_medium(129, c=lambda y: 1 + 0.3 * y)
    ops = [ModalWaveOperator(med, 2.0, beta, 3.0, backend=b) for b in ("python", "cython")]
    f0, f1 = rng.normal(size=ops[0].size), rng.normal(size=ops[0].size)
    (p_a, pt_a, e_a, fa), (p_b, pt_b, e_b, fb) = (
        op.run(f0, f1, energy=True, store_field=True) for op in ops)
    np.testing.assert_allclose(p_a, p_b, rtol=0, atol=1e-12)
    np.testing.assert_allclose(e_a, e_b, rtol=1e-12)
    np.testing.assert_allclose(fa, fb, rtol=0, atol=1e-12)
    gp, gv = rng.normal(size=len(p_a)), rng.normal(size=len(p_a))
    for x, y in zip(ops[0].adjoint(gp, gv), ops[1].adjoint(gp, gv)):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-10)


def test_python_tridiag_ignores_unused_corners():
    lower = np.array([99.0, -1.0, -1.0])
    upper = np.array([-1.0, -1.0, 99.0])
    x = py_tridiag(lower, np.full(3, 2.0), upper, np.array([1.0, 0.0, 1.0]))
    np.testing.assert_allclose(x, [1.0, 1.0, 1.0])
