"""Layered media: uniform depth grids, nodal coefficient profiles and the
admissible set used by the stability theory.

Depth ``y`` runs from 0 (the far boundary, where the optical field vanishes)
to ``H`` (the illuminated and measured boundary).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from ._numerics import derivative
from .errors import ConfigError, StructuralError


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[0, y_max]`` with ``n_points`` nodes."""

    n_points: int
    y_max: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points}")
        if not self.y_max > 0:
            raise ValueError(f"y_max must be positive, got {self.y_max}")

    @property
    def h_step(self) -> float:
        return self.y_max / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.y_max, self.n_points)


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """Nodal samples of a depth-dependent quantity on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise StructuralError(
                f"profile has {vals.size} samples, grid has {self.grid.n_points} nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.broadcast_to(func(grid.nodes), (grid.n_points,)))

    @classmethod
    def constant(cls, grid: Grid1D, value: float):
        return cls(grid, np.full(grid.n_points, float(value)))

    @property
    def y(self) -> np.ndarray:
        return self.grid.nodes

    def derivative(self, order: int = 1) -> np.ndarray:
        return derivative(self.values, self.grid.h_step, order)

    def resample(self, grid: Grid1D) -> "CoefficientProfile":
        """Linear interpolation onto another grid spanning the same interval."""
        if not math.isclose(grid.y_max, self.grid.y_max):
            raise StructuralError("resampling requires the same depth interval")
        return CoefficientProfile(grid, np.interp(grid.nodes, self.y, self.values))

    def __len__(self):
        return self.grid.n_points


@dataclass(frozen=True)
class AdmissibleBounds:
    """Constants defining the admissible set: D > d0, mu_a > mu0,
    C^3 norms at most ``m_cap``, and c^-2 >= ``c_m``."""

    d0: float
    mu0: float
    m_cap: float
    c_m: float

    def __post_init__(self):
        if not (0 < self.d0 < self.m_cap and 0 < self.mu0 < self.m_cap):
            raise ValueError("need 0 < d0 < M and 0 < mu0 < M")
        if not self.c_m > 0:
            raise ValueError("c_m must be positive")


@dataclass(frozen=True)
class LayeredMedium:
    diffusion: CoefficientProfile
    absorption: CoefficientProfile
    speed: CoefficientProfile
    width_L: float = 1.0
    bounds: AdmissibleBounds | None = None

    def __post_init__(self):
        g = self.diffusion.grid
        if self.absorption.grid != g or self.speed.grid != g:
            raise StructuralError("diffusion, absorption and speed must share one grid")
        if not self.width_L > 0:
            raise ValueError("width_L must be positive")
        if np.any(self.speed.values <= 0):
            raise ValueError("wave speed must be positive")

    @classmethod
    def from_functions(cls, n_points, H, D, mu_a, c=1.0, width_L=1.0, bounds=None):
        """Build a medium from callables or scalars evaluated at grid nodes."""
        grid = Grid1D(n_points, H)
        profiles = []
        for f in (D, mu_a, c):
            if callable(f):
                profiles.append(CoefficientProfile.from_function(grid, f))
            else:
                profiles.append(CoefficientProfile.constant(grid, f))
        return cls(*profiles, width_L=width_L, bounds=bounds)

    @property
    def grid(self) -> Grid1D:
        return self.diffusion.grid

    @property
    def H(self) -> float:
        return self.grid.y_max

    @property
    def y(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def c_inv2(self) -> np.ndarray:
        return 1.0 / self.speed.values**2

    def with_grid(self, n_points: int) -> "LayeredMedium":
        grid = Grid1D(n_points, self.H)
        return LayeredMedium(self.diffusion.resample(grid), self.absorption.resample(grid),
                             self.speed.resample(grid), self.width_L, self.bounds)


def wavenumber(k: int, width_L: float) -> float:
    """Fourier wavenumber 2*pi*k/L of the k-th lateral mode."""
    if not width_L > 0:
        raise ValueError("width_L must be positive")
    return 2.0 * math.pi * k / width_L


@dataclass(frozen=True)
class ConstraintMargin:
    margin: float
    location: float
    passed: bool


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    constraints: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def c3_norm(profile: CoefficientProfile) -> tuple[float, float]:
    """Discrete C^3 norm (max over derivative orders 0..3 of the sup norm)
    and the depth where it is attained."""
    best, where = -1.0, 0.0
    for order in range(4):
        d = np.abs(profile.derivative(order)) if order else np.abs(profile.values)
        i = int(np.argmax(d))
        if d[i] > best:
            best, where = float(d[i]), float(profile.y[i])
    return best, where


def w1inf_norm(values: np.ndarray, h: float) -> float:
    """Sum convention: ||f||_inf + ||f'||_inf."""
    return float(np.max(np.abs(values)) + np.max(np.abs(derivative(values, h, 1))))


def check_admissibility(medium: LayeredMedium, bounds: AdmissibleBounds | None = None
                        ) -> AdmissibilityReport:
    """Check a medium against the admissible set and report worst margins."""
    b = bounds or medium.bounds
    if b is None:
        raise ConfigError("no admissible bounds supplied")
    y = medium.y
    out = {}

    def lower(name, vals, floor, strict):
        i = int(np.argmin(vals))
        m = float(vals[i] - floor)
        out[name] = ConstraintMargin(m, float(y[i]), m > 0 if strict else m >= 0)

    lower("D_lower", medium.diffusion.values, b.d0, True)
    lower("mu_lower", medium.absorption.values, b.mu0, True)
    lower("c_inv2_lower", medium.c_inv2, b.c_m, False)
    for name, prof in (("D_C3", medium.diffusion), ("mu_C3", medium.absorption)):
        norm, where = c3_norm(prof)
        m = b.m_cap - norm
        out[name] = ConstraintMargin(m, where, m >= 0)
    return AdmissibilityReport(all(c.passed for c in out.values()), out)


# --- medium definition files -------------------------------------------------

def evaluate_profile(spec, y):
    """Nodal values of a profile spec: number, list or analytic mapping."""
    if isinstance(spec, (int, float)):
        return np.full_like(y, float(spec))
    if isinstance(spec, list):
        vals = np.asarray(spec, dtype=float)
        if vals.shape != y.shape:
            raise ConfigError(f"profile list has {vals.size} entries, expected {y.size}")
        return vals
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise ConfigError(f"cannot interpret profile spec {spec!r}")
    kind = spec["type"]
    try:
        if kind == "constant":
            return np.full_like(y, float(spec["value"]))
        if kind == "linear":
            return float(spec["a"]) + float(spec["b"]) * y
        if kind == "sine":
            return (float(spec.get("offset", 0.0)) + float(spec["amplitude"])
                    * np.sin(2 * np.pi * float(spec.get("frequency", 1.0)) * y
                             + float(spec.get("phase", 0.0))))
    except KeyError as exc:
        raise ConfigError(f"profile spec {spec!r} lacks parameter {exc}") from None
    raise ConfigError(f"unknown analytic profile type {kind!r}")


def medium_from_dict(data: Mapping, n_points: int | None = None) -> LayeredMedium:
    """Build a medium from the JSON-shaped definition.

    Keys: ``L``, ``H``, ``n_points``, ``D``, ``mu_a``, ``c`` and optional
    ``bounds`` = {d0, mu0, M, c_m}.  Profiles are lists of nodal values or
    analytic specs (constant / linear / sine).  ``n_points`` overrides the
    file value (only for analytic profiles).
    """
    try:
        H = float(data["H"])
        n = int(n_points or data["n_points"])
        grid = Grid1D(n, H)
        y = grid.nodes
        profiles = [CoefficientProfile(grid, evaluate_profile(data[key], y))
                    for key in ("D", "mu_a", "c")]
        bounds = None
        if data.get("bounds") is not None:
            bd = data["bounds"]
            bounds = AdmissibleBounds(float(bd["d0"]), float(bd["mu0"]),
                                      float(bd["M"]), float(bd["c_m"]))
        return LayeredMedium(*profiles, width_L=float(data.get("L", 1.0)), bounds=bounds)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid medium definition: {exc}") from None
    except StructuralError as exc:
        raise ConfigError(str(exc)) from None


def load_medium(path, n_points: int | None = None) -> LayeredMedium:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read medium file {path}: {exc}") from None
    return medium_from_dict(data, n_points)


def random_medium(rng: np.random.Generator, n_points: int = 257, H: float = 1.0,
                  width_L: float = 2 * np.pi, bounds: AdmissibleBounds | None = None,
                  c_range: tuple[float, float] = (0.8, 1.25),
                  amplitude: float = 0.3) -> LayeredMedium:
    """Smooth random medium: constants plus a 3-term cosine series,
    clamped into the admissible set.

    The relative perturbation amplitude of D and mu_a is at most
    ``amplitude``; the speed stays within ``c_range``.
    """
    bounds = bounds or AdmissibleBounds(d0=0.2, mu0=0.5, m_cap=200.0, c_m=1 / c_range[1] ** 2)
    grid = Grid1D(n_points, H)
    y = grid.nodes

    def series(base, rel):
        coef = rng.uniform(-1, 1, 3)
        coef *= rel / max(np.sum(np.abs(coef)), 1e-12)
        phase = rng.uniform(0, 2 * np.pi, 3)
        s = sum(coef[j] * np.cos((j + 1) * np.pi * y / H + phase[j]) for j in range(3))
        # shrink the perturbation until the C^3 cap holds (the constant part fits)
        norm, _ = c3_norm(CoefficientProfile(grid, base * s))
        room = 0.95 * bounds.m_cap - base
        if norm > room:
            s *= max(room, 0.0) / norm
        return base * (1.0 + s)

    D = series(rng.uniform(0.5, 2.0), rng.uniform(0, amplitude))
    mu = series(rng.uniform(1.0, 5.0), rng.uniform(0, amplitude))
    lo, hi = c_range
    mid = np.sqrt(lo * hi)
    half = 0.5 * np.log(hi / lo)
    coef = rng.uniform(-1, 1, 3)
    coef *= rng.uniform(0, 1) * half / max(np.sum(np.abs(coef)), 1e-12)
    phase = rng.uniform(0, 2 * np.pi, 3)
    c = mid * np.exp(sum(coef[j] * np.cos((j + 1) * np.pi * y / H + phase[j]) for j in range(3)))
    D = np.maximum(D, 1.05 * bounds.d0)
    mu = np.maximum(mu, 1.05 * bounds.mu0)
    c = np.clip(c, lo, hi)
    return LayeredMedium(CoefficientProfile(grid, D), CoefficientProfile(grid, mu),
                         CoefficientProfile(grid, c), width_L=width_L, bounds=bounds)
