"""Recovery of modal initial data from the boundary trace, and numerical
certificates for the boundary observability inequalities.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._numerics import derivative, trapz, trapezoid_weights
from .acoustic import (BoundaryTrace, ModalInitialData, ModalWaveOperator,
                       ObservabilityConstants, initial_energy, observability_constants)
from .errors import HypothesisViolation, StructuralError
from .medium import CoefficientProfile, LayeredMedium, wavenumber

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-10
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-8
DISCREPANCY_TAU = 1.5


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    k: int
    f0_rec: CoefficientProfile
    f1_rec: CoefficientProfile
    residual_norm: float
    iterations: int
    converged: bool = True


class TraceOperator:
    """Trace map with time quadrature weights folded in, plus the pieces the
    least-squares solver needs: the L^2 model mass and the energy
    preconditioner.

    The unknown is the stacked interior vector ``x = (f0, f1)``.  The
    operator is ``W^{1/2} F`` with trapezoid weights ``W`` in time, so the
    Euclidean norm of the data equals the L^2(0, T) norm of the traces.
    The preconditioner is the discrete energy Gram matrix
    ``blockdiag(K, M)``; observability says the trace map is well
    conditioned in that norm, which keeps CG iteration counts independent
    of the grid.
    """

    def __init__(self, op: ModalWaveOperator):
        self.op = op
        self.tw = np.sqrt(trapezoid_weights(op.nsteps + 1, op.dt))
        self.m = op.size
        self.mass = np.concatenate([op.weights, op.weights])
        lower = np.concatenate([[0.0], op.ko])
        upper = np.concatenate([op.ko, [0.0]])
        self._tri = (lower, op.kd.copy(), upper)

    def split(self, x):
        return x[:self.m], x[self.m:]

    def matvec(self, x):
        f0, f1 = self.split(x)
        p, pt = self.op.forward(f0, f1)
        return np.concatenate([self.tw * p, self.tw * pt])

    def rmatvec(self, r):
        n = len(self.tw)
        g0, g1 = self.op.adjoint(self.tw * r[:n], self.tw * r[n:])
        return np.concatenate([g0, g1])

    def precondition(self, s):
        s0, s1 = self.split(s)
        z0 = kernels.solve_tridiagonal(*self._tri, np.ascontiguousarray(s0))
        return np.concatenate([z0, s1 / self.op.mw])

    def data(self, trace: BoundaryTrace):
        return np.concatenate([self.tw * trace.samples_p, self.tw * trace.samples_pt])


def cgls(matvec, rmatvec, b, n_unknowns, damp=0.0, mass=None, precondition=None,
         max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, discrepancy=None):
    """Preconditioned conjugate gradients on the normal equations

        (A^T A + damp S) x = A^T b,

    with ``S = diag(mass)`` (identity by default).  Stops when the
    preconditioned normal residual has dropped by ``tol``, when the data
    residual is below ``tol * |b|``, or, if ``discrepancy`` is given, as
    soon as the data residual falls below it.  Returns
    ``(x, iterations, data_residual_norm, converged)``.
    """
    S = np.ones(n_unknowns) if mass is None else mass
    P = precondition or (lambda v: v)
    x = np.zeros(n_unknowns)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0, 0.0, True
    r = b.copy()
    s = rmatvec(r)
    z = P(s)
    p = z.copy()
    gamma = float(np.dot(s, z))
    gamma0 = gamma
    rnorm = bnorm
    for it in range(1, max_iter + 1):
        q = matvec(p)
        delta = float(np.dot(q, q)) + damp * float(np.dot(S * p, p))
        if delta <= 0.0:
            return x, it - 1, rnorm, True
        alpha = gamma / delta
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.linalg.norm(r))
        if discrepancy is not None and rnorm <= discrepancy:
            return x, it, rnorm, True
        s = rmatvec(r) - damp * S * x
        z = P(s)
        gamma_new = float(np.dot(s, z))
        if gamma_new <= tol**2 * gamma0 or rnorm <= tol * bnorm:
            return x, it, rnorm, True
        p = z + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, max_iter, rnorm, False


def recover_modal_initial_data(medium: LayeredMedium, trace: BoundaryTrace, beta: float,
                               T: float | None = None, tikhonov_eps: float = DEFAULT_EPS,
                               lam: float | None = None, max_iter: int = DEFAULT_MAX_ITER,
                               tol: float = DEFAULT_TOL, noise_rms: float | None = None,
                               tau: float = DISCREPANCY_TAU) -> RecoveryResult:
    """Least-squares recovery of (f0, f1) for one mode by preconditioned CGNE.

    Minimises ``|F(f0, f1) - trace|^2 + eps |(f0, f1)|^2`` in L^2(0, T)
    and L^2(0, H).  ``noise_rms`` (per-sample standard deviation of additive
    trace noise) activates the discrepancy stopping rule: iterations stop
    once the misfit drops below ``tau`` times the expected noise norm.
    """
    T = trace.T_final if T is None else T
    lam = wavenumber(trace.k, medium.width_L) if lam is None else lam
    op = ModalWaveOperator(medium, lam, beta, T, trace.dt)
    if op.nsteps + 1 != len(trace.samples_p):
        raise StructuralError(
            f"trace has {len(trace.samples_p)} samples, expected {op.nsteps + 1} for T={T}, dt={trace.dt}")
    consts = observability_constants(medium, beta)
    if T <= consts.T_min:
        warnings.warn(f"T = {T} does not exceed 2 theta H = {consts.T_min}; "
                      "recovery is not guaranteed to be stable", RuntimeWarning, stacklevel=2)
    A = TraceOperator(op)
    b = A.data(trace)
    disc = None
    if noise_rms:
        disc = tau * noise_rms * math.sqrt(2.0 * T)
    x, iters, _, converged = cgls(A.matvec, A.rmatvec, b, 2 * A.m, damp=tikhonov_eps,
                                  mass=A.mass, precondition=A.precondition,
                                  max_iter=max_iter, tol=tol, discrepancy=disc)
    f0, f1 = A.split(x)
    bnorm = float(np.linalg.norm(b))
    resid = float(np.linalg.norm(A.matvec(x) - b)) / bnorm if bnorm > 0 else 0.0
    if not converged:
        log.warning("CGNE did not converge in %d iterations (relative residual %.3e)",
                    iters, resid)
    grid = medium.grid
    return RecoveryResult(trace.k, CoefficientProfile(grid, np.concatenate([[0.0], f0])),
                          CoefficientProfile(grid, np.concatenate([[0.0], f1])),
                          resid, iters, converged)


# --- observability certificates ----------------------------------------------

@dataclass(frozen=True)
class ObservabilityCertificate:
    k: int
    lhs_f0: float       # lambda_k^2 int |f0|^2
    lhs_grad: float     # int c^-2 |f1|^2 + |f0'|^2
    rhs: float
    T: float
    margin: float
    energy0: float = 0.0
    constants: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.margin >= -1e-8 * max(self.rhs, 0.0)

    def as_dict(self) -> dict:
        return {"k": self.k, "lhs": max(self.lhs_f0, self.lhs_grad), "lhs_f0": self.lhs_f0,
                "lhs_grad": self.lhs_grad, "rhs": self.rhs, "margin": self.margin,
                "T": self.T, "energy0": self.energy0, "valid": self.valid,
                "constants": self.constants}


def _check_T(consts: ObservabilityConstants, T: float):
    if T <= consts.T_min:
        raise HypothesisViolation(
            f"observability needs T > 2 theta H = {consts.T_min:.6g}, got T = {T:.6g}")


def _modal_terms(medium, init, trace, factor):
    lam = init.wavenumber(medium)
    h = medium.grid.h_step
    f0, f1 = init.f0.values, init.f1.values
    lhs_f0 = lam**2 * trapz(f0**2, h)
    lhs_grad = trapz(medium.c_inv2 * f1**2 + derivative(f0, h, 1) ** 2, h)
    rhs = factor * trace.integral_pt2() + lam**2 * trace.integral_p2()
    return lam, lhs_f0, lhs_grad, rhs


def certify_observability(medium: LayeredMedium, init: ModalInitialData,
                          trace: BoundaryTrace, beta: float, T: float | None = None
                          ) -> ObservabilityCertificate:
    """Evaluate both sides of the modal observability inequalities.

    Both sides are discrete quadratures.  For initial data violating the
    corner condition f0'(H) = -beta f1(H) the trace integrals converge only
    at first order, so data that nearly saturate the inequality can fail
    on coarse grids and pass after refinement.
    """
    T = trace.T_final if T is None else T
    consts = observability_constants(medium, beta)
    _check_T(consts, T)
    factor = consts.factor(T, beta)
    _, lhs_f0, lhs_grad, rhs = _modal_terms(medium, init, trace, factor)
    margin = rhs - max(lhs_f0, lhs_grad)
    return ObservabilityCertificate(init.k, lhs_f0, lhs_grad, rhs, T, margin,
                                    initial_energy(medium, init), consts.as_dict())


@dataclass(frozen=True)
class FourierCertificate:
    lhs_grad_f0: float   # int |grad f0|^2 over the strip
    lhs_f1: float        # int c^-2 |f1|^2
    rhs: float
    margin: float
    T: float
    modal: tuple = ()

    @property
    def valid(self) -> bool:
        return self.margin >= -1e-8 * max(self.rhs, 0.0)

    def as_dict(self) -> dict:
        return {"lhs": max(self.lhs_grad_f0, self.lhs_f1), "lhs_grad_f0": self.lhs_grad_f0,
                "lhs_f1": self.lhs_f1, "rhs": self.rhs, "margin": self.margin,
                "T": self.T, "valid": self.valid,
                "modes": [c.as_dict() for c in self.modal]}


def certify_finite_fourier(medium: LayeredMedium, inits, traces, beta: float,
                           T: float | None = None) -> FourierCertificate:
    """Sum modal contributions into the finite-Fourier observability inequality.

    By orthonormality of the lateral basis, |grad f0|^2 integrates to
    sum_k (|f0k'|^2 + lambda_k^2 |f0k|^2) and the tangential derivative trace
    to sum_k lambda_k^2 |p_k(H, t)|^2.
    """
    inits, traces = list(inits), list(traces)
    if len(inits) != len(traces) or not inits:
        raise StructuralError("need one trace per mode")
    T = traces[0].T_final if T is None else T
    if any(abs(tr.T_final - T) > 1e-12 * max(1.0, T) for tr in traces):
        raise StructuralError("all modes must share the observation time T")
    if any(abs(tr.dt - traces[0].dt) > 1e-15 for tr in traces):
        raise StructuralError("all modes must share the time step")
    consts = observability_constants(medium, beta)
    _check_T(consts, T)
    factor = consts.factor(T, beta)
    grad = f1 = rhs = 0.0
    modal = []
    for init, tr in zip(inits, traces):
        lam, lhs_f0, lhs_grad, r = _modal_terms(medium, init, tr, factor)
        h = medium.grid.h_step
        grad += trapz(derivative(init.f0.values, h, 1) ** 2, h) + lhs_f0
        f1 += trapz(medium.c_inv2 * init.f1.values**2, h)
        rhs += r
        modal.append(ObservabilityCertificate(init.k, lhs_f0, lhs_grad, r, T,
                                              r - max(lhs_f0, lhs_grad), 0.0,
                                              consts.as_dict()))
    return FourierCertificate(grad, f1, rhs, rhs - max(grad, f1), T, tuple(modal))


# --- one-sided Hoelder bound ---------------------------------------------------

def minimize_linear_plus_inverse_square(a: float, b: float) -> tuple[float, float]:
    """Minimiser and minimum of a*lam + b/lam^2 over lam > 0 (a, b > 0)."""
    lam = (2.0 * b / a) ** (1.0 / 3.0)
    return lam, 3.0 * 2.0 ** (-2.0 / 3.0) * a ** (2.0 / 3.0) * b ** (1.0 / 3.0)


@dataclass(frozen=True)
class HolderBound:
    velocity_term: float
    boundary_term: float       # int ||p||^2_{H^{1/2}} dt
    N_star: int
    discrete_min: float
    lambda_star: float
    continuous_min: float
    closed_form_bound: float   # velocity term + 2 M^{2/3} (boundary term)^{2/3}
    majorizes: bool
    degenerate: bool = False
    lhs: float = math.nan      # int |grad f0|^2 when the initial data are supplied

    @property
    def margin(self) -> float:
        return self.discrete_min - self.lhs

    @property
    def valid(self) -> bool:
        return math.isnan(self.lhs) or self.margin >= -1e-8 * self.discrete_min

    def as_dict(self) -> dict:
        return {**self.__dict__, "margin": self.margin, "valid": self.valid}


def h_half_boundary_term(traces, width_L: float) -> float:
    """sum_k (1 + lambda_k^2)^{1/2} int |p_k(H,t)|^2 dt (spectral H^{1/2} norm)."""
    return float(sum(math.sqrt(1.0 + wavenumber(tr.k, width_L) ** 2) * tr.integral_p2()
                     for tr in traces))


def holder_one_side_bound(medium: LayeredMedium, traces, beta: float, T: float,
                          M_tilde: float, inits=None, max_modes: int = 100000) -> HolderBound:
    """Optimise velocity + lam_N B + M^2 / lam_{N+1}^2 over the mode cutoff.

    ``inits`` (the modal initial data behind ``traces``) adds the left-hand
    side int |grad f0|^2 to the report.
    """
    if not M_tilde >= 0:
        raise ValueError("M_tilde must be nonnegative")
    traces = list(traces)
    consts = observability_constants(medium, beta)
    _check_T(consts, T)
    A = consts.factor(T, beta) * sum(tr.integral_pt2() for tr in traces)
    B = h_half_boundary_term(traces, medium.width_L)
    closed = A + 2.0 * M_tilde ** (2.0 / 3.0) * B ** (2.0 / 3.0)
    lhs = math.nan
    if inits is not None:
        h = medium.grid.h_step
        lhs = sum(trapz(derivative(i.f0.values, h, 1) ** 2, h)
                  + i.wavenumber(medium) ** 2 * trapz(i.f0.values**2, h) for i in inits)
    if M_tilde == 0.0:
        return HolderBound(A, B, 0, A, 0.0, A, closed, True, lhs=lhs)
    if B == 0.0:
        # no boundary signal: the tail M^2/lam^2 decays without bound
        tail = A + M_tilde**2 / wavenumber(max_modes + 1, medium.width_L) ** 2
        return HolderBound(A, B, max_modes, tail, math.inf, A, closed, True,
                           degenerate=True, lhs=lhs)
    lam_star, cmin = minimize_linear_plus_inverse_square(B, M_tilde**2)
    L = medium.width_L
    best_N, best = 0, math.inf
    for N in range(0, max_modes):
        val = A + wavenumber(N, L) * B + M_tilde**2 / wavenumber(N + 1, L) ** 2
        if val < best:
            best_N, best = N, val
        if wavenumber(N, L) * B > best:
            break
    cont = A + cmin
    return HolderBound(A, B, best_N, best, lam_star, cont, closed, closed >= cont, lhs=lhs)
