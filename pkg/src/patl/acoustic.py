"""Per-mode damped wave propagation and the boundary observability constants.

The lateral Fourier mode ``k`` of the pressure obeys

    c^-2 p_tt = p_yy - lambda_k^2 p,   p(0,t) = 0,   p_y(H,t) + beta p_t(H,t) = 0.

Space is discretised with the lumped (trapezoid) mass matrix and the
standard three-point stiffness; the Robin condition is folded in through a
centred ghost node, giving ``M p'' + K p + B p' = 0`` with ``B`` acting on
the boundary node only.  Time stepping is explicit leapfrog with the damping
term centred, so the half-step energy

    E^{n+1/2} = |p^{n+1} - p^n|_M^2 / dt^2 + (p^{n+1})^T K p^n

satisfies the exact discrete balance
``E^{n+1/2} = E^{n-1/2} - 2 beta dt |(p_N^{n+1} - p_N^{n-1}) / (2 dt)|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._numerics import derivative, trapz, trapezoid_weights
from .errors import CFLViolation, NumericalError, StructuralError
from .medium import CoefficientProfile, LayeredMedium, w1inf_norm, wavenumber

CFL_SAFETY = 0.9


@dataclass(frozen=True, eq=False)
class ModalInitialData:
    k: int
    f0: CoefficientProfile
    f1: CoefficientProfile
    lam: float | None = None  # overrides 2 pi k / L when set

    def __post_init__(self):
        if self.f0.grid != self.f1.grid:
            raise StructuralError("f0 and f1 must share a grid")
        scale = max(1.0, float(np.max(np.abs(self.f0.values))))
        if abs(self.f0.values[0]) > 1e-12 * scale:
            raise ValueError("f0(0) must vanish (Dirichlet condition at y = 0)")

    def wavenumber(self, medium: LayeredMedium) -> float:
        return float(self.lam) if self.lam is not None else wavenumber(self.k, medium.width_L)

    @classmethod
    def zero(cls, grid, k=0, lam=None):
        z = CoefficientProfile.constant(grid, 0.0)
        return cls(k, z, z, lam)


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    k: int
    dt: float
    samples_p: np.ndarray
    samples_pt: np.ndarray
    T_final: float

    def __post_init__(self):
        if len(self.samples_p) != len(self.samples_pt):
            raise StructuralError("trace channels must have equal length")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples_p))

    def integral_p2(self) -> float:
        """Trapezoid approximation of the integral of |p(H,t)|^2 over (0, T)."""
        return trapz(self.samples_p**2, self.dt)

    def integral_pt2(self) -> float:
        return trapz(self.samples_pt**2, self.dt)

    def scaled(self, factor: float) -> "BoundaryTrace":
        return BoundaryTrace(self.k, self.dt, factor * self.samples_p,
                             factor * self.samples_pt, self.T_final)


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """Energies at t = 0 and the half steps (n + 1/2) dt, with the boundary
    dissipation accumulated up to the same instants."""

    times: np.ndarray
    energy: np.ndarray
    boundary_dissipation: np.ndarray

    def balance_error(self) -> np.ndarray:
        """|E(0) - E(t) - dissipation(t)| at every recorded time."""
        return np.abs(self.energy[0] - self.energy - self.boundary_dissipation)

    def drift(self) -> float:
        """Relative change of the scheme energy over the run, corrected for
        boundary dissipation: max |E^{n+1/2} + D^{n+1/2} - E^{1/2} - D^{1/2}| / E^{1/2}.

        Unlike :meth:`balance_error` it excludes the O(dt^2) start-up offset
        between E(0) of the initial data and the first half-step energy.
        """
        e = self.energy[1:] + self.boundary_dissipation[1:]
        return float(np.max(np.abs(e - e[0])) / self.energy[1]) if len(e) else 0.0

    def startup_offset(self) -> float:
        """|E^{1/2} + D^{1/2} - E(0)| / E(0)."""
        if len(self.energy) < 2:
            return 0.0
        return float(abs(self.energy[1] + self.boundary_dissipation[1] - self.energy[0])
                     / self.energy[0])


@dataclass(frozen=True, eq=False)
class WaveSimulation:
    trace: BoundaryTrace
    energy: EnergyLedger
    beta: float
    field: np.ndarray | None = None  # (steps+1, n_points) when requested

    def __iter__(self):
        return iter((self.trace, self.energy, self.beta))


@dataclass(frozen=True)
class ObservabilityConstants:
    theta: float
    C_M: float
    C_m1: float
    C_m2: float
    C_m3: float
    T_min: float
    exponent_integral: float = 0.0

    def factor(self, T: float, beta: float) -> float:
        """The weight C_M / (T - 2 theta H) + beta of the velocity trace."""
        if T <= self.T_min:
            return math.inf
        return self.C_M / (T - self.T_min) + beta

    def as_dict(self) -> dict:
        return {"theta": self.theta, "C_M": self.C_M, "C_m1": self.C_m1,
                "C_m2": self.C_m2, "C_m3": self.C_m3, "T_min": self.T_min,
                "exponent_integral": self.exponent_integral}


def max_stable_dt(medium: LayeredMedium, lam: float) -> float:
    """Largest leapfrog step for which the scheme is stable (Gershgorin bound)."""
    h = medium.grid.h_step
    return h / (float(medium.speed.values.max()) * math.sqrt(1.0 + 0.25 * (lam * h) ** 2))


def default_dt(medium: LayeredMedium, lam: float = 0.0) -> float:
    return CFL_SAFETY * max_stable_dt(medium, lam)


def n_time_steps(T: float, dt: float) -> int:
    return int(math.floor(T / dt + 1e-9))


@dataclass(eq=False)
class ModalWaveOperator:
    """Linear map from modal initial data to the boundary trace, and its
    exact discrete transpose.

    Unknowns live on the nodes 1..n-1 (node 0 carries the Dirichlet value).
    """

    medium: LayeredMedium
    lam: float
    beta: float
    T: float
    dt: float | None = None
    backend: str | None = None
    mw: np.ndarray = field(init=False)
    kd: np.ndarray = field(init=False)
    ko: np.ndarray = field(init=False)
    nsteps: int = field(init=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        dt_max = max_stable_dt(self.medium, self.lam)
        if self.dt is None:
            self.dt = CFL_SAFETY * dt_max
        elif self.dt > dt_max * (1 + 1e-12):
            raise CFLViolation(self.dt, dt_max)
        g = self.medium.grid
        h = g.h_step
        w = trapezoid_weights(g.n_points, h)[1:]
        self.weights = w
        self.mw = w * self.medium.c_inv2[1:]
        m = g.n_points - 1
        self.kd = np.full(m, 2.0 / h) + self.lam**2 * w
        self.kd[-1] = 1.0 / h + self.lam**2 * w[-1]
        self.ko = np.full(m - 1, -1.0 / h)
        self.nsteps = n_time_steps(self.T, self.dt)
        self._k = kernels if self.backend is None else kernels.backend_module(self.backend)

    # -- helpers on interior vectors --
    @property
    def size(self) -> int:
        return len(self.mw)

    def stiffness(self, x):
        out = self.kd * x
        out[1:] += self.ko * x[:-1]
        out[:-1] += self.ko * x[1:]
        return out

    def energy_of(self, f0, f1) -> float:
        """Discrete energy |f1|_M^2 + f0^T K f0 of interior vectors."""
        return float(np.dot(self.mw * f1, f1) + np.dot(f0, self.stiffness(f0)))

    def _first_step(self, f0, f1):
        rhs = self.stiffness(f0)
        rhs[-1] += self.beta * f1[-1]
        return f0 + self.dt * f1 - 0.5 * self.dt**2 * rhs / self.mw

    def run(self, f0, f1, energy=False, store_field=False):
        """Propagate interior data; returns (p trace, p_t trace, energies, field)."""
        n = self.nsteps
        trace = np.empty(n + 2)
        en = np.empty(n + 1) if energy else None
        fld = np.empty((n + 2, self.size)) if store_field else None
        p1 = self._first_step(f0, f1)
        self._k.leapfrog_forward(self.mw, self.kd, self.ko, float(self.beta), float(self.dt),
                                 np.ascontiguousarray(f0, dtype=float), p1, n, trace, en, fld)
        p = trace[:n + 1].copy()
        pt = np.empty(n + 1)
        pt[0] = f1[-1]
        pt[1:] = (trace[2:] - trace[:-2]) / (2.0 * self.dt)
        if not (np.all(np.isfinite(trace)) and (en is None or np.all(np.isfinite(en)))):
            bad = int(np.argmin(np.isfinite(trace)))
            raise NumericalError(f"non-finite pressure at time step {bad}")
        return p, pt, en, fld

    def forward(self, f0, f1):
        p, pt, _, _ = self.run(f0, f1)
        return p, pt

    def adjoint(self, gp, gv):
        """Transpose of :meth:`forward` with respect to Euclidean products."""
        n = self.nsteps
        dt = self.dt
        forcing = np.zeros(n + 2)
        forcing[:n + 1] += gp
        # pt[j] = (P[j+1] - P[j-1]) / (2 dt), j = 1..n
        forcing[2:n + 2] += gv[1:] / (2.0 * dt)
        forcing[0:n] -= gv[1:] / (2.0 * dt)
        a0, a1 = self._k.leapfrog_adjoint(self.mw, self.kd, self.ko, float(self.beta),
                                          float(dt), forcing, n)
        scaled = a1 / self.mw
        g0 = a0 + a1 - 0.5 * dt**2 * self.stiffness(scaled)
        g1 = dt * a1
        g1[-1] -= 0.5 * dt**2 * self.beta * scaled[-1]
        g1[-1] += gv[0]
        return g0, g1


def _interior(profile_or_array):
    vals = getattr(profile_or_array, "values", profile_or_array)
    return np.asarray(vals, dtype=float)[1:]


def compute_energy(medium: LayeredMedium, p_now, p_prev, dt: float, lambda_k: float) -> float:
    """Discrete energy between two consecutive states (full-grid arrays).

    With ``p_now`` = p^{n+1} and ``p_prev`` = p^n this is E^{n+1/2}; passing
    the same state twice gives the potential part alone.  The velocity is the
    difference quotient, weighted by the trapezoid mass c^-2; the gradient
    term is exact for piecewise-linear interpolants.
    """
    op = ModalWaveOperator(medium, lambda_k, 0.0, T=1.0, dt=None)
    a, b = _interior(p_now), _interior(p_prev)
    d = a - b
    return float(np.dot(op.mw * d, d) / dt**2 + np.dot(a, op.stiffness(b)))


def simulate_modal_wave(medium: LayeredMedium, init: ModalInitialData, T: float,
                        dt: float | None = None, beta: float = 1.0,
                        store_field: bool = False, backend: str | None = None
                        ) -> WaveSimulation:
    """Leapfrog integration of one lateral mode, recording the trace at y = H
    and the discrete energy balance."""
    if init.f0.grid != medium.grid:
        raise StructuralError("initial data and medium grids differ")
    lam = init.wavenumber(medium)
    op = ModalWaveOperator(medium, lam, beta, T, dt, backend=backend)
    f0, f1 = _interior(init.f0), _interior(init.f1)
    p, pt, en, fld = op.run(f0, f1, energy=True, store_field=store_field)
    n = op.nsteps
    trace = BoundaryTrace(init.k, op.dt, p, pt, float(T))
    e0 = op.energy_of(f0, f1)
    times = np.concatenate([[0.0], (np.arange(n) + 0.5) * op.dt])
    energy = np.concatenate([[e0], en[:n]])
    v2 = pt**2
    diss = 2.0 * beta * op.dt * np.concatenate([[0.0], 0.5 * v2[0] + np.cumsum(
        np.concatenate([[0.0], v2[1:n]]))])
    ledger = EnergyLedger(times, energy, diss)
    full = None
    if store_field:
        full = np.zeros((n + 1, medium.grid.n_points))
        full[:, 1:] = fld[:n + 1]
    return WaveSimulation(trace, ledger, float(beta), full)


def observability_constants(medium: LayeredMedium, beta: float) -> ObservabilityConstants:
    """Constants of the continuity and observability estimates for speed c(y).

    ``c_m`` is taken as min c^-2 and the W^{1,inf} norm uses the sum
    convention ||f||_inf + ||f'||_inf.
    """
    ci2 = medium.c_inv2
    h, H = medium.grid.h_step, medium.H
    theta = math.sqrt(float(ci2.max()))
    dci2 = derivative(ci2, h, 1)
    expo = trapz(medium.speed.values**2 * np.abs(dci2), h)
    C_M = H * math.exp(expo) * (ci2[-1] + beta**2)
    c_m = float(ci2.min())
    pre = 1.0 / (1.0 + H * ci2[-1])
    C1 = pre * (1.0 + (1.0 + H / c_m) * w1inf_norm(ci2, h))
    C2 = H * pre
    C3 = pre * (1.0 + 2.0 * H * math.sqrt(float(ci2.max())))
    return ObservabilityConstants(theta, C_M, C1, C2, C3, 2.0 * theta * H, expo)


@dataclass(frozen=True)
class ContinuityCheck:
    lhs: float
    rhs: float
    margin: float
    energy0: float


def initial_energy(medium: LayeredMedium, init: ModalInitialData) -> float:
    op = ModalWaveOperator(medium, init.wavenumber(medium), 0.0, T=1.0)
    return op.energy_of(_interior(init.f0), _interior(init.f1))


def verify_continuity_bound(medium: LayeredMedium, trace: BoundaryTrace,
                            init: ModalInitialData, constants: ObservabilityConstants,
                            beta: float, T: float) -> ContinuityCheck:
    """beta^2 int |p_t(H)|^2 <= ((C_m1 + C_m2 lambda_k) T + C_m3) E_k(0)."""
    lam = init.wavenumber(medium)
    e0 = initial_energy(medium, init)
    lhs = beta**2 * trace.integral_pt2()
    rhs = ((constants.C_m1 + constants.C_m2 * lam) * T + constants.C_m3) * e0
    return ContinuityCheck(lhs, rhs, rhs - lhs, e0)
