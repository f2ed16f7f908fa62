"""Reconstruction of (D, mu_a) from the internal data of two illuminations.

With ``F = D u_{k1}^2`` and the ratio ``h = h2/h1 = u_{k2}/u_{k1}`` the mode
equations combine into

    -(F h')' + (lam2^2 - lam1^2) F h = 0,

so ``F h'`` is an exponential of an integral of ``h/h'``.  Once ``F`` is
known, ``v = 1/u_{k1}`` satisfies ``-(F v')' - lam1^2 F v = h1``, which is
marched from the measured boundary ``y = H`` into the medium.  Everything
below is only recoverable with a weight that decays like the lower envelope
squared, which is why the reconstruction carries a trust mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._numerics import derivative
from .errors import DataInconsistencyError, SingularIntegrandError, StructuralError
from .medium import CoefficientProfile, Grid1D, LayeredMedium
from .optical import InternalDatum, compute_envelopes

TRUST_THRESHOLD = math.sqrt(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class RatioData:
    h: CoefficientProfile
    h_prime: CoefficientProfile
    h_at_0: float
    lower_slope: float = math.nan
    slope_bound: np.ndarray | None = None  # pointwise lower bound for h'


@dataclass(frozen=True)
class Calibration:
    """Boundary values at y = H assumed known (shared by both media)."""

    D_H: float
    D_prime_H: float = 0.0
    mu_prime_H: float | None = None  # enables the first-derivative boundary datum

    @classmethod
    def coerce(cls, calib) -> "Calibration":
        if isinstance(calib, Calibration):
            return calib
        return cls(**dict(calib))

    @classmethod
    def from_medium(cls, medium: LayeredMedium) -> "Calibration":
        return cls(float(medium.diffusion.values[-1]), float(medium.diffusion.derivative(1)[-1]),
                   float(medium.absorption.derivative(1)[-1]))


@dataclass(frozen=True, eq=False)
class OpticalReconstruction:
    F: CoefficientProfile
    u_rec: CoefficientProfile
    D_rec: CoefficientProfile
    mu_rec: CoefficientProfile
    calib: Calibration
    weight: CoefficientProfile
    trusted: np.ndarray
    truncated: bool = False

    @property
    def grid(self) -> Grid1D:
        return self.F.grid

    @property
    def untrusted_depth(self) -> float:
        """Depth H - y of the shallowest untrusted node."""
        bad = np.flatnonzero(~self.trusted)
        return float(self.grid.y_max - self.grid.nodes[bad[-1]]) if bad.size else math.inf


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def _datum(x) -> InternalDatum:
    if isinstance(x, InternalDatum):
        return x
    if isinstance(x, CoefficientProfile):
        return InternalDatum(0, math.nan, x, CoefficientProfile(x.grid, x.derivative(1)))
    raise TypeError(f"expected InternalDatum or CoefficientProfile, got {type(x).__name__}")


def slope_lower_bound(medium: LayeredMedium, k1: int, k2: int) -> np.ndarray:
    """Pointwise lower bound for h' from the envelopes of both modes:

        h'(y) >= (lam2^2 - lam1^2) / (D(y) hi_1(y)^2) int_0^y D lo_1 lo_2 ds.

    The value at y = 0 is the limit 0.
    """
    e1, e2 = compute_envelopes(medium, k1), compute_envelopes(medium, k2)
    if not (e1.valid and e2.valid):
        raise DataInconsistencyError("envelopes need kappa_m > 0 for both modes")
    lam1, lam2 = (2 * math.pi * k / medium.width_L for k in (k1, k2))
    D = medium.diffusion.values
    h = medium.grid.h_step
    integral = cumulative_trapezoid(D * e1.lower * e2.lower, dx=h, initial=0.0)
    out = np.zeros_like(D)
    out[1:] = (lam2**2 - lam1**2) * integral[1:] / (D[1:] * e1.upper[1:] ** 2)
    return out


def build_ratio(h1, h2, medium: LayeredMedium | None = None,
                k1: int | None = None, k2: int | None = None) -> RatioData:
    """Ratio h = h2/h1 of two internal data and its derivative.

    Both data vanish at y = 0; the ratio there is the limit h2'(0)/h1'(0).
    Each mode is ``a_k y (1 + c y + O(y^2))`` with ``c`` independent of k,
    so h is even to leading order and h'(0) = 0.  When ``medium``, ``k1`` and
    ``k2`` are given, the envelope lower bound on h' is also evaluated.
    """
    d1, d2 = _datum(h1), _datum(h2)
    if d1.h.grid != d2.h.grid:
        raise StructuralError("internal data live on different grids")
    grid = d1.h.grid
    a, b = d1.h.values, d2.h.values
    if np.any(a[1:] <= 0):
        i = 1 + int(np.argmax(a[1:] <= 0))
        raise DataInconsistencyError(f"h1 is not positive at node {i} (y = {grid.nodes[i]:.6g})")
    dh = grid.h_step
    s1, s2 = derivative(a, dh, 1)[0], derivative(b, dh, 1)[0]
    h0 = s2 / s1 if s1 != 0 else 1.0
    ratio = np.empty_like(a)
    ratio[0] = h0
    ratio[1:] = b[1:] / a[1:]
    hp = derivative(ratio, dh, 1)
    hp[0] = 0.0
    slope, bound = math.nan, None
    if medium is not None and k1 is not None and k2 is not None:
        bound = slope_lower_bound(medium, k1, k2)
        slope = float(bound[1:].min())
    return RatioData(CoefficientProfile(grid, ratio), CoefficientProfile(grid, hp),
                     float(h0), slope, bound)


def verify_ratio_ode(ratio: RatioData, F_true, lambda1: float, lambda2: float
                     ) -> CoefficientProfile:
    """Discrete residual of -(F h')' + (lam2^2 - lam1^2) F h at interior nodes
    (zero at both ends), using the conservative three-point form."""
    F = _values(F_true)
    h = ratio.h.values
    if F.shape != h.shape:
        raise StructuralError("F and h live on different grids")
    dy = ratio.h.grid.h_step
    Fm = 0.5 * (F[1:] + F[:-1])
    flux = Fm * np.diff(h) / dy
    res = np.zeros_like(h)
    res[1:-1] = -(flux[1:] - flux[:-1]) / dy + (lambda2**2 - lambda1**2) * F[1:-1] * h[1:-1]
    return CoefficientProfile(ratio.h.grid, res)


def reconstruct_F(ratio: RatioData, lambda1: float, lambda2: float, D_H: float = 1.0,
                  guard: float = 0.0, truncate: bool = False) -> CoefficientProfile:
    """Recover F = D u_{k1}^2 from the ratio.

    ``F(y) h'(y) = D_H h'(H) exp(-(lam2^2 - lam1^2) int_y^H h/h' ds)``,
    accumulated by the trapezoid rule from y = H downwards (h/h' blows up
    like 1/y at the bottom, so the integral is anchored at the top).
    F(0) = 0.  Nodes with h' <= ``guard`` raise :class:`SingularIntegrandError`
    unless ``truncate`` is set, in which case F is set to 0 from that node
    down.
    """
    h, hp = ratio.h.values, ratio.h_prime.values
    grid = ratio.h.grid
    delta = lambda2**2 - lambda1**2
    bad = np.flatnonzero(hp[1:] <= guard) + 1
    start = 1
    if bad.size:
        node = int(bad[-1])
        if not truncate:
            raise SingularIntegrandError(node, float(hp[node]))
        start = node + 1
    F = np.zeros_like(h)
    if start >= len(h):
        return CoefficientProfile(grid, F)
    g = h[start:] / hp[start:]
    tail = cumulative_trapezoid(g[::-1], dx=grid.h_step, initial=0.0)[::-1]
    with np.errstate(over="ignore", under="ignore"):
        F[start:] = D_H * hp[-1] / hp[start:] * np.exp(-delta * tail)
    if not np.all(np.isfinite(F)):
        F[~np.isfinite(F)] = 0.0
    return CoefficientProfile(grid, F)


def _march_reciprocal(F, h1, lam1, dy, v_H, q_H):
    """Backward trapezoid march of v' = q/F, q' = -lam1^2 F v - h1 from y = H.

    Returns v and the index of the deepest node reached (nodes below are nan).
    """
    n = len(F)
    v = np.full(n, np.nan)
    q = np.full(n, np.nan)
    v[-1], q[-1] = v_H, q_H
    c = 0.5 * dy
    det = 1.0 + c * c * lam1**2
    last = n - 1
    for i in range(n - 2, 0, -1):
        if F[i] <= 0.0:
            break
        a = v[i + 1] - c * q[i + 1] / F[i + 1]
        b = q[i + 1] + c * (lam1**2 * F[i + 1] * v[i + 1] + h1[i + 1] + h1[i])
        qi = (b + c * lam1**2 * F[i] * a) / det
        vi = a - c * qi / F[i]
        if not (np.isfinite(vi) and vi > 0.0):
            break
        v[i], q[i] = vi, qi
        last = i
    return v, last


def boundary_slope(F, h1, dy: float, calib: Calibration, cauchy: str = "auto") -> float:
    """u'(H) from the calibration values.

    ``"F"``: with F = D u^2 and u(H) = 1, ``u'(H) = (F'(H) - D'(H)) / (2 D(H))``.
    ``"h1"``: with h1 = mu_a u, ``u'(H) = (h1'(H) - mu_a'(H)) / h1(H)``; this
    needs mu_a'(H) but only a first derivative of the data, whereas F'(H)
    carries a second derivative of the data through h'.  ``"auto"`` picks
    ``"h1"`` when mu_a'(H) is known.
    """
    if cauchy == "auto":
        cauchy = "F" if calib.mu_prime_H is None else "h1"
    if cauchy == "F":
        return (derivative(F, dy, 1)[-1] - calib.D_prime_H) / (2.0 * calib.D_H)
    if cauchy == "h1":
        if calib.mu_prime_H is None:
            raise ValueError("the h1 boundary datum needs mu_prime_H")
        return (derivative(h1, dy, 1)[-1] - calib.mu_prime_H) / h1[-1]
    raise ValueError(f"unknown boundary datum {cauchy!r}")


def reconstruct_coefficients(F: CoefficientProfile, h1, lambda1: float, calib,
                             weight=None, trust_threshold: float = TRUST_THRESHOLD,
                             cauchy: str = "auto") -> OpticalReconstruction:
    """Recover u_{k1}, D and mu_a from F and the first internal datum.

    The missing Cauchy datum u'(H) comes from the calibration values, see
    :func:`boundary_slope`.  Nodes where the
    recovered u^2 falls below ``trust_threshold``, where the march broke
    down, and y = 0 are flagged untrusted; once a node is untrusted every
    deeper node is too, and their values repeat the last trusted one.

    ``weight`` (profile or array) is reported alongside; by default it is
    the squared lower envelope of the reconstructed medium.
    """
    calib = Calibration.coerce(calib)
    d1 = _datum(h1)
    grid = F.grid
    if d1.h.grid != grid:
        raise StructuralError("F and h1 live on different grids")
    Fv, hv = F.values, d1.h.values
    if not Fv[-1] > 0 or not hv[-1] > 0:
        raise DataInconsistencyError("F(H) and h1(H) must be positive")
    dy = grid.h_step
    uH = boundary_slope(Fv, hv, dy, calib, cauchy)
    v, last = _march_reciprocal(Fv, hv, lambda1, dy, 1.0, -Fv[-1] * uH)
    truncated = last > 1
    n = len(Fv)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(np.isfinite(v), 1.0 / v, 0.0)
    ok = np.isfinite(v) & (u * u >= trust_threshold) & (Fv > 0)
    ok[0] = False
    # trusted region is contiguous from the top
    first_bad = n - 1 - int(np.argmin(ok[::-1])) if not ok.all() else -1
    trusted = np.zeros(n, dtype=bool)
    trusted[first_bad + 1:] = True
    D = np.zeros(n)
    mu = np.zeros(n)
    D[trusted] = Fv[trusted] * v[trusted] ** 2
    mu[trusted] = hv[trusted] * v[trusted]
    if first_bad >= 0 and first_bad + 1 < n:
        D[:first_bad + 1] = D[first_bad + 1]
        mu[:first_bad + 1] = mu[first_bad + 1]
    if weight is None:
        w = _default_weight(grid, D, mu, lambda1)
    else:
        w = _values(weight)
    return OpticalReconstruction(F, CoefficientProfile(grid, u), CoefficientProfile(grid, D),
                                 CoefficientProfile(grid, mu), calib, CoefficientProfile(grid, w),
                                 trusted, truncated)


def _default_weight(grid, D, mu, lam):
    if not (np.all(D > 0) and np.all(mu > 0)):
        return np.zeros(grid.n_points)
    const = CoefficientProfile.constant(grid, 1.0)
    med = LayeredMedium(CoefficientProfile(grid, D), CoefficientProfile(grid, mu), const,
                        width_L=2 * math.pi)
    env = compute_envelopes(med, lam=lam)
    return env.lower**2 if env.valid else np.zeros(grid.n_points)


def reconstruct(h1, h2, lambda1: float, lambda2: float, calib, weight=None,
                truncate: bool = True, trust_threshold: float = TRUST_THRESHOLD,
                cauchy: str = "auto") -> OpticalReconstruction:
    """Ratio, F and coefficients in one call."""
    calib = Calibration.coerce(calib)
    ratio = build_ratio(h1, h2)
    F = reconstruct_F(ratio, lambda1, lambda2, calib.D_H, truncate=truncate)
    return reconstruct_coefficients(F, h1, lambda1, calib, weight, trust_threshold, cauchy)


# --- stability diagnostics ---------------------------------------------------

def c0_norm(x) -> float:
    return float(np.max(np.abs(_values(x))))


def c1_distance(a, b, dy: float) -> float:
    """Discrete C^1 norm (sup of values plus sup of the derivative) of a - b."""
    d = _values(a) - _values(b)
    return float(np.max(np.abs(d)) + np.max(np.abs(derivative(d, dy, 1))))


@dataclass(frozen=True)
class StabilityDiagnostics:
    data_c1: float
    lhs: dict
    ratios: dict

    def as_dict(self) -> dict:
        return {"data_c1": self.data_c1, "lhs": dict(self.lhs), "ratios": dict(self.ratios)}


def stability_diagnostics(rec: OpticalReconstruction, rec_tilde: OpticalReconstruction,
                          data_pairs) -> StabilityDiagnostics:
    """Left-hand sides of the optical stability estimates and their ratios to
    the C^1 data misfit ``sum_i |h_i - h~_i|_{C^1}``.

    Weighted quantities take the larger of the two weightings so that the
    report is symmetric in the two reconstructions.
    """
    if rec.grid != rec_tilde.grid:
        raise StructuralError("reconstructions live on different grids")
    dy = rec.grid.h_step
    data = sum(c1_distance(a, b, dy) for a, b in data_pairs)
    u, ut = rec.u_rec.values, rec_tilde.u_rec.values
    dD = rec.D_rec.values - rec_tilde.D_rec.values
    dmu = rec.mu_rec.values - rec_tilde.mu_rec.values
    w, wt = rec.weight.values, rec_tilde.weight.values
    lhs = {
        "F_c0": c0_norm(rec.F.values - rec_tilde.F.values),
        "u_weighted_c0": max(c0_norm(u * (u - ut)), c0_norm(ut * (u - ut))),
        "u2_D_c0": max(c0_norm(u**2 * dD), c0_norm(ut**2 * dD)),
        "u2_mu_c0": max(c0_norm(u**2 * dmu), c0_norm(ut**2 * dmu)),
        "weighted_D_c0": max(c0_norm(w * dD), c0_norm(wt * dD)),
        "weighted_mu_c0": max(c0_norm(w * dmu), c0_norm(wt * dmu)),
    }
    ratios = {k: (v / data if data > 0 else (0.0 if v == 0 else math.inf))
              for k, v in lhs.items()}
    return StabilityDiagnostics(data, lhs, ratios)
