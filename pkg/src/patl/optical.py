"""Per-mode optical diffusion solver.

For the illumination ``phi_k`` the fluence factorises as ``u_k(y) phi_k(x)``
where ``u_k`` solves

    -(D u')' + (mu_a + lambda_k^2 D) u = 0,   u(0) = 0,  u(H) = 1.

Besides the solution this module builds the sinh comparison envelopes
obtained from the Liouville transform and the constructive lower bound on
``u'``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._numerics import derivative
from .errors import NumericalError
from .medium import CoefficientProfile, LayeredMedium, wavenumber


@dataclass(frozen=True, eq=False)
class Envelopes:
    kappa: np.ndarray
    kappa_m: float
    kappa_M: float
    lower: np.ndarray | None
    upper: np.ndarray | None

    @property
    def valid(self) -> bool:
        """False when kappa_m <= 0 ("k too small"); envelopes are then absent."""
        return self.lower is not None


@dataclass(frozen=True, eq=False)
class ModalSolution:
    k: int
    lambda_k: float
    u: CoefficientProfile
    u_prime: CoefficientProfile
    kappa_m: float
    kappa_M: float
    envelope_lo: CoefficientProfile | None
    envelope_hi: CoefficientProfile | None


@dataclass(frozen=True, eq=False)
class InternalDatum:
    """Absorbed energy profile h = mu_a * u_k of one illumination."""

    k: int
    lambda_k: float
    h: CoefficientProfile
    h_prime: CoefficientProfile


@dataclass(frozen=True, eq=False)
class DerivativeBound:
    rho: np.ndarray          # pointwise lower bound for u'(y)
    rho_min: float           # the constant: min over the grid
    observed_min: float      # min of the discrete u'
    holds: bool              # u' >= rho at every node


def _lam(medium, k, lam):
    return float(lam) if lam is not None else wavenumber(k, medium.width_L)


def _sinh_ratio(s, y, H):
    # sinh(s y) / sinh(s H) without overflow for large s H
    if s * H < 30.0:
        return np.sinh(s * y) / np.sinh(s * H)
    return np.exp(s * (y - H)) * (1.0 - np.exp(-2.0 * s * y)) / (1.0 - np.exp(-2.0 * s * H))


def kappa_profile(medium: LayeredMedium, k: int = 0, lam: float | None = None) -> np.ndarray:
    """kappa(y) = (sqrt D)''/sqrt D + mu_a/D + lambda_k^2 at the grid nodes."""
    lam = _lam(medium, k, lam)
    D = medium.diffusion.values
    sq = np.sqrt(D)
    return derivative(sq, medium.grid.h_step, 2) / sq + medium.absorption.values / D + lam**2


def compute_envelopes(medium: LayeredMedium, k: int = 0, lam: float | None = None) -> Envelopes:
    kappa = kappa_profile(medium, k, lam)
    kmin, kmax = float(kappa.min()), float(kappa.max())
    if kmin <= 0:
        return Envelopes(kappa, kmin, kmax, None, None)
    y, H = medium.y, medium.H
    D = medium.diffusion.values
    scale = np.sqrt(D[-1] / D)
    # sinh(s y)/sinh(s H) decreases in s, so the largest kappa gives the
    # lower envelope (comparison principle for -v'' + kappa v = 0)
    lo = scale * _sinh_ratio(np.sqrt(kmax), y, H)
    hi = scale * _sinh_ratio(np.sqrt(kmin), y, H)
    return Envelopes(kappa, kmin, kmax, lo, hi)


def assemble_operator(medium: LayeredMedium, lam: float):
    """Tridiagonal rows (lower, diag, upper) of the conservative scheme, with
    Dirichlet rows at both ends; face diffusivities are harmonic means."""
    D = medium.diffusion.values
    mu = medium.absorption.values
    h = medium.grid.h_step
    n = len(D)
    face = 2.0 * D[:-1] * D[1:] / (D[:-1] + D[1:])
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.ones(n)
    lower[1:-1] = -face[:-1]
    upper[1:-1] = -face[1:]
    diag[1:-1] = face[:-1] + face[1:] + h * h * (mu[1:-1] + lam**2 * D[1:-1])
    return lower, diag, upper


def solve_modal_bvp(medium: LayeredMedium, k: int = 0, lam: float | None = None) -> ModalSolution:
    """Solve the modal optical problem for mode ``k`` (or wavenumber ``lam``)."""
    lam = _lam(medium, k, lam)
    lower, diag, upper = assemble_operator(medium, lam)
    rhs = np.zeros(len(diag))
    rhs[-1] = 1.0
    u = kernels.solve_tridiagonal(lower, diag, upper, rhs)
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"optical system for k={k} is singular")
    grid = medium.grid
    env = compute_envelopes(medium, k, lam)
    lo = CoefficientProfile(grid, env.lower) if env.valid else None
    hi = CoefficientProfile(grid, env.upper) if env.valid else None
    return ModalSolution(k, lam, CoefficientProfile(grid, u),
                         CoefficientProfile(grid, derivative(u, grid.h_step, 1)),
                         env.kappa_m, env.kappa_M, lo, hi)


def derivative_lower_bound(medium: LayeredMedium, solution: ModalSolution,
                           slack: float | None = None) -> DerivativeBound:
    """Constructive positive lower bound for u' (valid when kappa_m > 0).

    Integrating the equation over (0, y) and inserting the lower envelope gives

        D u'(y) >= A s D0 / sinh(sH) + (mu0 + lam^2 D0) A (cosh(s y) - 1) / (s sinh(sH))

    with s = sqrt(kappa_M) (the rate of the lower envelope) and
    A = sqrt(D(H) / max D).  D0 and mu0 are the
    minima of the profiles.  Dividing by max D bounds u' itself.  The
    discrete check tolerates ``slack`` (default 10 h^2) for truncation error.
    """
    if solution.kappa_m <= 0:
        raise NumericalError("kappa_m <= 0: mode too small for the derivative bound")
    D = medium.diffusion.values
    d0, mu0, dmax = D.min(), medium.absorption.values.min(), D.max()
    s = np.sqrt(solution.kappa_M)
    y, H = medium.y, medium.H
    a = np.sqrt(D[-1] / dmax)
    lam = solution.lambda_k
    if s * H < 30.0:
        first = a * s * d0 / np.sinh(s * H)
        second = (mu0 + lam**2 * d0) * a * (np.cosh(s * y) - 1.0) / (s * np.sinh(s * H))
    else:
        first = 2.0 * a * s * d0 * np.exp(-s * H)
        second = (mu0 + lam**2 * d0) * a * (np.exp(s * (y - H)) + np.exp(-s * (y + H))
                                           - 2.0 * np.exp(-s * H)) / s
    rho = (first + second) / dmax
    up = solution.u_prime.values
    if slack is None:
        slack = 10.0 * medium.grid.h_step**2
    return DerivativeBound(rho, float(rho.min()), float(up.min()),
                           bool(np.all(up >= rho - slack)))


def make_internal_data(medium: LayeredMedium, k1: int, k2: int,
                       lam1: float | None = None, lam2: float | None = None
                       ) -> tuple[InternalDatum, InternalDatum]:
    """Internal data h_j = mu_a u_{k_j} for two illuminations, k1 < k2."""
    if lam1 is None and lam2 is None and not k1 < k2:
        raise ValueError(f"need k1 < k2, got {k1}, {k2}")
    out = []
    for k, lam in ((k1, lam1), (k2, lam2)):
        sol = solve_modal_bvp(medium, k, lam)
        if sol.kappa_m <= 0:
            raise NumericalError(f"kappa_m <= 0 for mode {k}; choose a larger k")
        out.append(internal_datum(medium, sol))
    return out[0], out[1]


def internal_datum(medium: LayeredMedium, sol: ModalSolution) -> InternalDatum:
    grid = medium.grid
    h = medium.absorption.values * sol.u.values
    return InternalDatum(sol.k, sol.lambda_k, CoefficientProfile(grid, h),
                         CoefficientProfile(grid, derivative(h, grid.h_step, 1)))
