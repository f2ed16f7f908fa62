"""End-to-end stability experiments: optical forward, acoustic forward, noisy
traces, acoustic recovery, optical reconstruction and error bookkeeping.

Also hosts the depth-resolution curve, the interpolation-chain bound and the
writers for CSV, JSON and gnuplot artefacts.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._numerics import c1_norm, sobolev_norm, trapz
from .acoustic import (BoundaryTrace, ModalInitialData, observability_constants,
                       simulate_modal_wave)
from .errors import ConfigError, HypothesisViolation, PatlError
from .inversion_acoustic import DEFAULT_EPS, DISCREPANCY_TAU, recover_modal_initial_data
from .inversion_optical import TRUST_THRESHOLD, Calibration, reconstruct
from .medium import (CoefficientProfile, LayeredMedium, load_medium, medium_from_dict,
                     wavenumber, evaluate_profile)
from .optical import compute_envelopes, make_internal_data

DEFAULT_NOISE_LEVELS = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
REFERENCE_N_POINTS = 513

# The reference phantom: mild heterogeneity around D = 1, mu_a = 3 on a unit
# depth with lateral period 2 pi, so lambda_k = k.
REFERENCE_MEDIUM = {
    "L": 2 * math.pi,
    "H": 1.0,
    "n_points": REFERENCE_N_POINTS,
    "D": {"type": "linear", "a": 1.0, "b": 0.1},
    "mu_a": {"type": "sine", "offset": 3.0, "amplitude": 0.2, "frequency": 0.5},
    "c": {"type": "linear", "a": 1.0, "b": 0.1},
    "bounds": {"d0": 0.5, "mu0": 1.0, "M": 50.0, "c_m": 0.5},
}


def reference_medium(n_points: int | None = None) -> LayeredMedium:
    return medium_from_dict(REFERENCE_MEDIUM, n_points)


def thread_cap(default: int | None = None) -> int:
    """Worker count for sweeps: PATL_THREADS if set, else the CPU count."""
    raw = os.environ.get("PATL_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"PATL_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError("PATL_THREADS must be at least 1")
        return n
    return default or os.cpu_count() or 1


# --- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    medium: Any = None            # path, dict or LayeredMedium; None = reference phantom
    k1: int = 1
    k2: int = 2
    beta: float = 1.0
    T: float | None = None        # default 4 theta H
    noise_levels: Sequence[float] = DEFAULT_NOISE_LEVELS
    seeds: Sequence[int] = tuple(range(10))
    output_dir: str | None = None
    n_points: int | None = None
    dt: float | None = None
    f1: Any = None                # profile spec for the initial velocity; default zero
    tikhonov_eps: float = DEFAULT_EPS
    discrepancy_tau: float = DISCREPANCY_TAU
    include_clean: bool = True

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**dict(data))
        cfg.noise_levels = tuple(float(e) for e in cfg.noise_levels)
        cfg.seeds = tuple(int(s) for s in cfg.seeds)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if isinstance(data.get("medium"), str):
            # relative medium paths resolve against the config file
            p = Path(data["medium"])
            if not p.is_absolute():
                data["medium"] = str(Path(path).parent / p)
        return cls.from_dict(data)

    def load_medium(self) -> LayeredMedium:
        m = self.medium
        if m is None:
            return reference_medium(self.n_points)
        if isinstance(m, LayeredMedium):
            return m if self.n_points is None else m.with_grid(self.n_points)
        if isinstance(m, Mapping):
            return medium_from_dict(m, self.n_points)
        return load_medium(m, self.n_points)

    def validate(self) -> LayeredMedium:
        """Check the hypotheses and return the loaded medium."""
        if not int(self.k1) < int(self.k2):
            raise ConfigError(f"need k1 < k2, got {self.k1}, {self.k2}")
        levels = list(self.noise_levels)
        if any(e < 0 for e in levels) or levels != sorted(levels):
            raise ConfigError("noise levels must be nonnegative and ascending")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        medium = self.load_medium()
        theta_H = observability_constants(medium, self.beta).T_min
        if self.T is not None and not self.T > theta_H:
            raise HypothesisViolation(f"need T > 2 theta H = {theta_H:.6g}, got {self.T}")
        if compute_envelopes(medium, self.k1).kappa_m <= 0:
            raise HypothesisViolation(f"kappa_m <= 0 for k1 = {self.k1}; choose a larger k1")
        return medium

    def observation_time(self, medium: LayeredMedium) -> float:
        if self.T is not None:
            return float(self.T)
        return 2.0 * observability_constants(medium, self.beta).T_min

    def as_dict(self) -> dict:
        d = asdict(self) if not isinstance(self.medium, LayeredMedium) else {
            **{f.name: getattr(self, f.name) for f in fields(self) if f.name != "medium"},
            "medium": "<in-memory>"}
        d["noise_levels"] = list(d["noise_levels"])
        d["seeds"] = list(d["seeds"])
        return d


# --- records and reports -------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    epsilon: float
    seed: int
    boundary_misfit: float
    rhs_bound: float
    weighted_err_mu: float
    weighted_err_D: float
    data_c1_misfit: float
    data_h1_misfit: float
    untrusted_depth: float
    cg_iterations: tuple = ()

    CSV_COLUMNS = ("epsilon", "seed", "boundary_misfit", "rhs_bound", "weighted_err_mu",
                   "weighted_err_D", "data_c1_misfit", "data_h1_misfit", "untrusted_depth",
                   "cg_iterations_1", "cg_iterations_2")

    def row(self) -> list:
        its = list(self.cg_iterations) + [0, 0]
        return [self.epsilon, self.seed, self.boundary_misfit, self.rhs_bound,
                self.weighted_err_mu, self.weighted_err_D, self.data_c1_misfit,
                self.data_h1_misfit, self.untrusted_depth, its[0], its[1]]


@dataclass
class StabilityReport:
    records: list = field(default_factory=list)
    slope_mu: float = math.nan
    slope_D: float = math.nan
    C_emp_mu: float = math.nan
    C_emp_D: float = math.nan
    violations_mu: int = 0
    violations_D: int = 0
    misfit_violations: int = 0
    depth_curve: dict | None = None
    constants: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def noisy(self) -> list:
        return [r for r in self.records if r.epsilon > 0]

    def summary(self) -> dict:
        keys = ("slope_mu", "slope_D", "C_emp_mu", "C_emp_D", "violations_mu",
                "violations_D", "misfit_violations")
        return {"n_records": len(self.records), **{k: getattr(self, k) for k in keys},
                "constants": self.constants, "config": self.config}


def fit_loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2 or np.ptp(np.log(x[ok])) == 0:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _calibrated_violations(records, attr, scale):
    """C_emp from the smallest noise level, then count records above
    C_emp * scale(record)."""
    if not records:
        return math.nan, 0
    eps0 = min(r.epsilon for r in records)
    base = [getattr(r, attr) / scale(r) for r in records if r.epsilon == eps0 and scale(r) > 0]
    if not base:
        return math.nan, 0
    C = max(base)
    bad = sum(1 for r in records if r.epsilon > eps0 and getattr(r, attr) > C * scale(r))
    return C, bad


def assemble_report(records, config=None, constants=None, depth_curve=None) -> StabilityReport:
    rep = StabilityReport(sorted(records, key=lambda r: (r.epsilon, r.seed)),
                          depth_curve=depth_curve, constants=dict(constants or {}),
                          config=dict(config or {}))
    noisy = rep.noisy
    eps = [r.epsilon for r in noisy]
    rep.slope_mu = fit_loglog_slope(eps, [r.weighted_err_mu for r in noisy])
    rep.slope_D = fit_loglog_slope(eps, [r.weighted_err_D for r in noisy])
    rep.C_emp_mu, rep.violations_mu = _calibrated_violations(
        noisy, "weighted_err_mu", lambda r: math.sqrt(r.epsilon))
    rep.C_emp_D, rep.violations_D = _calibrated_violations(
        noisy, "weighted_err_D", lambda r: math.sqrt(r.epsilon))
    worst = [max(r.weighted_err_mu, r.weighted_err_D) for r in noisy]
    if noisy:
        eps0 = min(eps)
        base = [w / r.rhs_bound for w, r in zip(worst, noisy) if r.epsilon == eps0 and r.rhs_bound > 0]
        C = max(base) if base else math.nan
        rep.constants["C_emp_misfit"] = C
        rep.misfit_violations = sum(1 for w, r in zip(worst, noisy)
                                    if r.epsilon > eps0 and w > C * r.rhs_bound)
    return rep


# --- pipeline ------------------------------------------------------------------

class PipelineStageError(PatlError):
    """A stage failed; ``partial`` holds the report of the completed points."""

    def __init__(self, stage: str, cause: Exception, partial: StabilityReport | None = None):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial
        self.exit_code = getattr(cause, "exit_code", 3)


@dataclass(frozen=True, eq=False)
class _Prepared:
    medium: LayeredMedium
    lams: tuple
    data: tuple            # clean internal data h1, h2
    traces: tuple          # clean boundary traces
    weight: np.ndarray     # envelope_lo(k1)^2
    calib: Calibration
    T: float
    factor: float


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PipelineStageError:
        raise
    except (PatlError, ArithmeticError, ValueError) as exc:
        raise PipelineStageError(name, exc) from exc


def prepare(config: ExperimentConfig, medium: LayeredMedium | None = None) -> _Prepared:
    medium = medium or config.validate()
    T = config.observation_time(medium)
    k1, k2 = int(config.k1), int(config.k2)
    lams = (wavenumber(k1, medium.width_L), wavenumber(k2, medium.width_L))
    data = _stage("optical-forward", make_internal_data, medium, k1, k2)
    if config.f1 is None:
        f1 = CoefficientProfile.constant(medium.grid, 0.0)
    else:
        f1 = CoefficientProfile(medium.grid, _stage("config", evaluate_profile, config.f1, medium.y))
    traces = tuple(
        _stage("acoustic-forward", simulate_modal_wave, medium,
               ModalInitialData(k, d.h, f1), T, config.dt, config.beta).trace
        for k, d in zip((k1, k2), data))
    weight = compute_envelopes(medium, k1).lower ** 2
    consts = observability_constants(medium, config.beta)
    return _Prepared(medium, lams, tuple(data), traces, weight, Calibration.from_medium(medium),
                     T, consts.factor(T, config.beta))


def _noisy_trace(trace: BoundaryTrace, eps: float, rng: np.random.Generator) -> BoundaryTrace:
    n = len(trace.samples_p)
    p = trace.samples_p + eps * rng.standard_normal(n)
    pt = trace.samples_pt + eps * rng.standard_normal(n)
    return BoundaryTrace(trace.k, trace.dt, p, pt, trace.T_final)


def run_point(config: ExperimentConfig, prep: _Prepared, eps: float, seed: int):
    """One (noise level, seed) experiment.  Returns the record and the
    unweighted D error profile (nan where untrusted)."""
    med = prep.medium
    dt = prep.traces[0].dt
    misfit = 0.0
    recovered = []
    iterations = []
    for j, (tr, lam) in enumerate(zip(prep.traces, prep.lams)):
        rng = np.random.default_rng([int(seed), j])
        noisy = _noisy_trace(tr, eps, rng)
        dp = noisy.samples_p - tr.samples_p
        dpt = noisy.samples_pt - tr.samples_pt
        misfit += trapz(prep.factor * dpt**2 + lam**2 * dp**2, dt)
        rec = _stage("acoustic-inversion", recover_modal_initial_data, med, noisy, config.beta,
                     prep.T, config.tikhonov_eps, noise_rms=eps if eps > 0 else None,
                     tau=config.discrepancy_tau)
        recovered.append(rec.f0_rec)
        iterations.append(rec.iterations)
    rec = _stage("optical-inversion", reconstruct, recovered[0], recovered[1], prep.lams[0],
                 prep.lams[1], prep.calib, prep.weight)
    w = prep.weight
    dD = med.diffusion.values - rec.D_rec.values
    dmu = med.absorption.values - rec.mu_rec.values
    h = med.grid.h_step
    c1 = sum(c1_norm(a.values - b.h.values, h) for a, b in zip(recovered, prep.data))
    h1n = sum(sobolev_norm(a.values - b.h.values, h, 1) for a, b in zip(recovered, prep.data))
    record = SweepRecord(float(eps), int(seed), float(misfit), float(misfit) ** 0.25,
                         float(np.max(np.abs(w * dmu))), float(np.max(np.abs(w * dD))),
                         c1, h1n, rec.untrusted_depth, tuple(iterations))
    return record, np.where(rec.trusted, np.abs(dD), np.nan)


def sweep_points(config: ExperimentConfig) -> list:
    pts = [(float(e), int(s)) for e in config.noise_levels for s in config.seeds]
    if config.include_clean and not any(e == 0.0 for e, _ in pts):
        pts.insert(0, (0.0, 0))
    return pts


def run_pipeline(config: ExperimentConfig, threads: int | None = None) -> StabilityReport:
    """Run the full stability sweep.  Points run concurrently (capped by
    PATL_THREADS); the report is reduced in a fixed order, so the outcome
    does not depend on the thread count."""
    medium = _stage("config", config.validate)
    prep = prepare(config, medium)
    pts = sweep_points(config)
    workers = max(1, min(threads or thread_cap(), len(pts) or 1))
    constants = pipeline_constants(config, prep)
    results = {}
    failure = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pt: pool.submit(run_point, config, prep, *pt) for pt in pts}
        for pt in pts:
            try:
                results[pt] = futures[pt].result()
            except PipelineStageError as exc:
                failure = failure or exc
    records = [results[pt][0] for pt in pts if pt in results]
    curve = depth_resolution_curve(medium, config.k1)
    local = _local_error(pts, results, config)
    depth = curve.as_dict()
    depth["local_error"] = local.tolist() if local is not None else None
    report = assemble_report(records, config.as_dict(), constants, depth)
    if failure is not None:
        failure.partial = report
        raise failure
    return report


def _local_error(pts, results, config):
    noisy = [pt for pt in pts if pt[0] > 0 and pt in results]
    if not noisy:
        return None
    top = max(e for e, _ in noisy)
    profiles = np.array([results[pt][1] for pt in noisy if pt[0] == top])
    with np.errstate(all="ignore"):
        out = np.full(profiles.shape[1], np.nan)
        ok = np.all(np.isfinite(profiles), axis=0)
        out[ok] = profiles[:, ok].mean(axis=0)
    return out


def pipeline_constants(config: ExperimentConfig, prep: _Prepared) -> dict:
    med = prep.medium
    consts = observability_constants(med, config.beta)
    e1 = compute_envelopes(med, config.k1)
    return {
        "observability": consts.as_dict(),
        "T": prep.T,
        "velocity_weight": prep.factor,
        "kappa_m_k1": e1.kappa_m,
        "kappa_M_k1": e1.kappa_M,
        "calibration": asdict(prep.calib),
        "interpolation_constant": interpolation_constant(),
        "trust_threshold": TRUST_THRESHOLD,
        "n_points": med.grid.n_points,
        "dt": prep.traces[0].dt,
        "units": "raw discrete values; misfit = sum_k int (velocity_weight |dp_t|^2 "
                 "+ lambda_k^2 |dp|^2) dt, rhs_bound = misfit^(1/4)",
    }


# --- interpolation chain -------------------------------------------------------

@dataclass(frozen=True)
class InterpolationBound:
    bound: float
    constant: float
    actual_c1: float | None = None

    @property
    def holds(self) -> bool | None:
        return None if self.actual_c1 is None else self.actual_c1 <= self.bound


INTERPOLATION_SAFETY = 2.0


@lru_cache(maxsize=1)
def interpolation_constant() -> float:
    """Empirical constant of |d|_{C^1} <= C (|d|_{H^1} |d|_{H^3})^{1/2},
    calibrated on data differences of the reference phantom under smooth
    absorption perturbations, times a safety factor of 2."""
    base = reference_medium(257)
    h = base.grid.h_step
    ref = make_internal_data(base, 1, 2)
    best = 0.0
    y = base.y
    for m in range(1, 5):
        for amp in (0.05, -0.05):
            mu = base.absorption.values * (1.0 + amp * np.cos(m * np.pi * y))
            other = LayeredMedium(base.diffusion, CoefficientProfile(base.grid, mu), base.speed,
                                  base.width_L)
            for a, b in zip(ref, make_internal_data(other, 1, 2)):
                d = a.h.values - b.h.values
                best = max(best, c1_norm(d, h) / math.sqrt(sobolev_norm(d, h, 1)
                                                           * sobolev_norm(d, h, 3)))
    return INTERPOLATION_SAFETY * best


def interpolation_chain(h_misfit_H1: float, a_priori_H3: float, constant: float | None = None,
                        profiles=None, h_step: float | None = None) -> InterpolationBound:
    """C^1 misfit bound C (|h - h~|_{H^1} * a_priori_H3)^{1/2}.

    When ``profiles = (h, h_tilde)`` and ``h_step`` are given, the actual
    discrete C^1 misfit is reported for comparison.
    """
    if h_misfit_H1 < 0 or a_priori_H3 < 0:
        raise ValueError("norms must be nonnegative")
    C = interpolation_constant() if constant is None else constant
    actual = None
    if profiles is not None:
        a, b = (np.asarray(getattr(p, "values", p), float) for p in profiles)
        actual = c1_norm(a - b, h_step)
    return InterpolationBound(C * math.sqrt(h_misfit_H1 * a_priori_H3), C, actual)


# --- depth resolution ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DepthCurve:
    y: np.ndarray
    weight: np.ndarray
    resolvable: np.ndarray
    threshold: float
    resolvable_depth: float
    fitted_rate: float
    predicted_rate: float     # 2 sqrt(kappa) of the lower envelope (kappa_M)
    kappa_m: float
    kappa_M: float
    crossing_depth: float = math.nan   # depth where w = threshold (log-linear interpolation)

    @property
    def depth(self) -> np.ndarray:
        return self.y[-1] - self.y

    @property
    def rate_error(self) -> float:
        return abs(self.fitted_rate - self.predicted_rate) / self.predicted_rate

    def as_dict(self) -> dict:
        return {"y": self.y.tolist(), "weight": self.weight.tolist(),
                "resolvable": self.resolvable.astype(int).tolist(), "threshold": self.threshold,
                "resolvable_depth": self.resolvable_depth, "fitted_rate": self.fitted_rate,
                "predicted_rate": self.predicted_rate, "kappa_m": self.kappa_m,
                "kappa_M": self.kappa_M, "crossing_depth": self.crossing_depth}


def depth_resolution_curve(medium: LayeredMedium, k1: int, threshold: float = TRUST_THRESHOLD,
                           lam: float | None = None) -> DepthCurve:
    """Weight w = envelope_lo^2 with its resolvable region w >= threshold.

    The resolvable depth is measured from y = H down to the first node where
    w drops below the threshold.  The exponential rate is fitted on the
    upper third of the depth interval.
    """
    env = compute_envelopes(medium, k1, lam)
    if not env.valid:
        raise HypothesisViolation(f"kappa_m <= 0 for k = {k1}")
    y = medium.y
    H = medium.H
    w = env.lower**2
    below = np.flatnonzero(w < threshold)
    top = int(below[-1]) + 1 if below.size else 0
    resolvable = np.zeros(len(y), dtype=bool)
    resolvable[top:] = True
    res_depth = float(H - y[top]) if top < len(y) else 0.0
    cross = _crossing_depth(y, w, threshold, top)
    sel = (y >= 2.0 * H / 3.0) & (w > 0)
    rate = float(np.polyfit(y[sel], np.log(w[sel]), 1)[0])
    return DepthCurve(y, w, resolvable, float(threshold), res_depth, rate,
                      2.0 * math.sqrt(env.kappa_M), env.kappa_m, env.kappa_M, cross)


def _crossing_depth(y, w, threshold, top) -> float:
    if top == 0:
        return float(y[-1] - y[0])
    if top >= len(y):
        return 0.0
    lo, hi = w[top - 1], w[top]
    if lo <= 0:
        return float(y[-1] - y[top - 1])
    t = (math.log(threshold) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return float(y[-1] - (y[top - 1] + t * (y[top] - y[top - 1])))


# --- output --------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    return path


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit_outputs(report: StabilityReport, directory) -> list[str]:
    """Write sweep/depth CSVs, the JSON summary and gnuplot files.

    Returns the list of written paths (summary last).
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {out}: {exc}") from None
    written = []
    if report.records:
        written.append(write_csv(out / "sweep.csv", SweepRecord.CSV_COLUMNS,
                                 (r.row() for r in report.records)))
        noisy = report.noisy
        if noisy:
            levels = sorted({r.epsilon for r in noisy})
            rows = []
            for e in levels:
                sel = [r for r in noisy if r.epsilon == e]
                rows.append([e, max(r.weighted_err_mu for r in sel),
                             max(r.weighted_err_D for r in sel),
                             np.mean([r.rhs_bound for r in sel]),
                             report.C_emp_mu * math.sqrt(e), report.C_emp_D * math.sqrt(e)])
            dat = out / "stability.dat"
            _write_text(dat, "# epsilon max_err_mu max_err_D rhs_bound Cmu*sqrt(eps) CD*sqrt(eps)\n"
                        + "".join(" ".join(_fmt(v) for v in row) + "\n" for row in rows))
            plt = _write_text(out / "stability.plt", _STABILITY_PLT)
            written += [dat, plt]
    if report.depth_curve:
        dc = report.depth_curve
        y = np.asarray(dc["y"])
        local = dc.get("local_error")
        local = np.full(len(y), np.nan) if local is None else np.asarray(local, float)
        rows = list(zip(y, y[-1] - y, dc["weight"], local))
        written.append(write_csv(out / "depth_curve.csv", ("y", "depth", "weight", "local_error"),
                                 rows))
        dat = out / "depth.dat"
        _write_text(dat, "# depth weight local_error\n" + "".join(
            f"{_fmt(r[1])} {_fmt(r[2])} {_fmt(r[3])}\n" for r in rows))
        written += [dat, _write_text(out / "depth.plt", _DEPTH_PLT)]
    summary = out / "summary.json"
    files = [str(p) for p in written] + [str(summary)]
    payload = _jsonable({**report.summary(), "files": files})
    _write_text(summary, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    written.append(summary)
    paths = [str(p) for p in written]
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise ConfigError(f"outputs missing after write: {missing}")
    return paths


_STABILITY_PLT = """set terminal pngcairo size 800,600
set output 'stability.png'
set logscale xy
set xlabel 'trace noise RMS'
set ylabel 'weighted error'
set key left top
plot 'stability.dat' using 1:2 with linespoints title 'mu_a', \\
     'stability.dat' using 1:3 with linespoints title 'D', \\
     'stability.dat' using 1:5 with lines dashtype 2 title 'C sqrt(eps) (mu_a)', \\
     'stability.dat' using 1:6 with lines dashtype 2 title 'C sqrt(eps) (D)'
"""

_DEPTH_PLT = """set terminal pngcairo size 800,600
set output 'depth.png'
set logscale y
set xlabel 'depth H - y'
set ylabel 'weight'
plot 'depth.dat' using 1:2 with lines title 'envelope^2', \\
     'depth.dat' using 1:3 with points title 'local error'
"""
