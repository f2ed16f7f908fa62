"""Command line interface ``patl``.

Every subcommand accepts ``--config FILE`` with a JSON object whose keys are
the option names (dashes or underscores); flags given on the command line
override the file.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 certificate violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .acoustic import (BoundaryTrace, ModalInitialData, default_dt, observability_constants,
                       simulate_modal_wave)
from .errors import ConfigError, PatlError, StructuralError
from .harness import (ExperimentConfig, PipelineStageError, depth_resolution_curve,
                      emit_outputs, run_pipeline, write_csv)
from .inversion_acoustic import (DEFAULT_EPS, DEFAULT_MAX_ITER, DEFAULT_TOL,
                                 certify_finite_fourier, certify_observability,
                                 holder_one_side_bound, recover_modal_initial_data)
from .inversion_optical import TRUST_THRESHOLD, Calibration, reconstruct
from .medium import CoefficientProfile, Grid1D, LayeredMedium, load_medium, wavenumber
from .optical import compute_envelopes, internal_datum, solve_modal_bvp

log = logging.getLogger("patl")

CERTIFICATE_TOL = 1e-8


# --- csv helpers ---------------------------------------------------------------

def read_columns(path) -> dict:
    """Read a headed numeric CSV into {column: array}."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if len(rows) < 2:
        raise ConfigError(f"{path}: expected a header and data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows")
    return {h: data[:, j] for j, h in enumerate(header)}


def read_profile(path, grid: Grid1D | None = None, column: str | None = None
                 ) -> CoefficientProfile:
    """Profile CSV with columns ``y`` and one value column (or ``column``)."""
    cols = read_columns(path)
    if "y" not in cols:
        raise ConfigError(f"{path}: missing 'y' column")
    y = cols["y"]
    names = [c for c in cols if c != "y"]
    name = column if column in cols else (names[0] if names else None)
    if name is None:
        raise ConfigError(f"{path}: no value column")
    if grid is None:
        grid = Grid1D(len(y), float(y[-1]))
    if len(y) != grid.n_points or not np.allclose(y, grid.nodes, rtol=0, atol=1e-9 * grid.y_max):
        raise StructuralError(f"{path}: samples do not match the {grid.n_points}-node grid")
    return CoefficientProfile(grid, cols[name])


def read_trace(path, k: int) -> BoundaryTrace:
    cols = read_columns(path)
    for c in ("t", "p_H", "pt_H"):
        if c not in cols:
            raise ConfigError(f"{path}: missing '{c}' column")
    t = cols["t"]
    if len(t) < 2:
        raise ConfigError(f"{path}: need at least two time samples")
    dt = float(t[1] - t[0])
    return BoundaryTrace(k, dt, cols["p_H"], cols["pt_H"], float(t[-1]))


def _write_json(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text)
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _parse_calib(text) -> Calibration:
    if isinstance(text, dict):
        return Calibration.coerce(text)
    vals = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"calibration entry {part!r} is not key=value")
        vals[key.strip()] = float(val)
    try:
        return Calibration(**vals)
    except TypeError as exc:
        raise ConfigError(f"bad calibration {text!r}: {exc}") from None


# --- option merging ------------------------------------------------------------

PATH_KEYS = {"medium", "f0", "f1", "trace", "h1", "h2", "out", "out_h", "out_trace",
             "out_energy", "out_dir", "output_dir", "summary"}


class Options(dict):
    """Merged options: defaults < config file < command line."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    def need(self, *names):
        missing = [n for n in names if self.get(n) is None]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise ConfigError(f"missing required option(s): {flags}")


def merge_options(args: argparse.Namespace, defaults: dict) -> Options:
    opts = Options(defaults)
    cfg = getattr(args, "config", None)
    if cfg:
        try:
            data = json.loads(Path(cfg).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        base = Path(cfg).resolve().parent
        for k, v in data.items():
            k = k.replace("-", "_")
            # relative file paths in a config file are relative to that file
            if k in PATH_KEYS and isinstance(v, str) and not Path(v).is_absolute():
                v = str(base / v)
            elif k in PATH_KEYS and isinstance(v, list):
                v = [str(base / x) if not Path(x).is_absolute() else x for x in v]
            opts[k] = v
    opts.update({k: v for k, v in vars(args).items()
                 if k not in ("config", "func", "command")})
    return opts


# --- subcommands ---------------------------------------------------------------

def _medium(opts) -> LayeredMedium:
    opts.need("medium")
    return load_medium(opts.medium, opts.get("n_points"))


def cmd_optical_solve(opts) -> int:
    opts.need("medium", "k", "out")
    med = _medium(opts)
    sol = solve_modal_bvp(med, int(opts.k))
    nan = np.full(med.grid.n_points, np.nan)
    lo = sol.envelope_lo.values if sol.envelope_lo is not None else nan
    hi = sol.envelope_hi.values if sol.envelope_hi is not None else nan
    if sol.envelope_lo is None:
        log.warning("kappa_m <= 0 for k=%s: k too small, envelopes omitted", opts.k)
    write_csv(opts.out, ("y", "u", "u_prime", "envelope_lo", "envelope_hi"),
              zip(med.y, sol.u.values, sol.u_prime.values, lo, hi))
    if opts.get("out_h"):
        h = internal_datum(med, sol).h.values
        write_csv(opts.out_h, ("y", "h"), zip(med.y, h))
    return 0


def cmd_acoustic_simulate(opts) -> int:
    opts.need("medium", "k", "f0", "T", "out_trace")
    med = _medium(opts)
    f0 = read_profile(opts.f0, med.grid)
    f1 = read_profile(opts.f1, med.grid) if opts.get("f1") else CoefficientProfile.constant(med.grid, 0.0)
    sim = simulate_modal_wave(med, ModalInitialData(int(opts.k), f0, f1), float(opts.T),
                              opts.get("dt"), float(opts.beta))
    tr = sim.trace
    write_csv(opts.out_trace, ("t", "p_H", "pt_H"), zip(tr.times, tr.samples_p, tr.samples_pt))
    if opts.get("out_energy"):
        en = sim.energy
        write_csv(opts.out_energy, ("t", "E", "cumulative_dissipation"),
                  zip(en.times, en.energy, en.boundary_dissipation))
    return 0


def cmd_acoustic_invert(opts) -> int:
    opts.need("medium", "trace", "k", "out")
    med = _medium(opts)
    trace = read_trace(opts.trace, int(opts.k))
    T = float(opts.T) if opts.get("T") is not None else trace.T_final
    res = recover_modal_initial_data(med, trace, float(opts.beta), T, float(opts.eps),
                                     max_iter=int(opts.max_iter), tol=float(opts.tol),
                                     noise_rms=opts.get("noise_rms"))
    if not res.converged:
        log.warning("CGNE stopped after %d iterations, relative residual %.3e",
                    res.iterations, res.residual_norm)
    write_csv(opts.out, ("y", "f0_rec", "f1_rec"), zip(med.y, res.f0_rec.values, res.f1_rec.values))
    return 0


def cmd_optical_invert(opts) -> int:
    opts.need("h1", "h2", "k1", "k2", "calib", "out")
    k1, k2 = int(opts.k1), int(opts.k2)
    if not k1 < k2:
        raise ConfigError(f"need k1 < k2, got {k1}, {k2}")
    weight = None
    width = float(opts.L) if opts.get("L") is not None else None
    grid = None
    if opts.get("medium"):
        med = _medium(opts)
        grid = med.grid
        width = med.width_L if width is None else width
        weight = compute_envelopes(med, k1).lower ** 2
    width = 1.0 if width is None else width
    h1 = read_profile(opts.h1, grid)
    h2 = read_profile(opts.h2, h1.grid)
    rec = reconstruct(h1, h2, wavenumber(k1, width), wavenumber(k2, width),
                      _parse_calib(opts.calib), weight,
                      trust_threshold=float(opts.trust_threshold), cauchy=opts.cauchy)
    y = h1.grid.nodes
    write_csv(opts.out, ("y", "F", "u_rec", "D_rec", "mu_rec", "weight", "trusted"),
              zip(y, rec.F.values, rec.u_rec.values, rec.D_rec.values, rec.mu_rec.values,
                  rec.weight.values, rec.trusted))
    return 0


def _modal_inputs(opts, med):
    modes = _int_list(opts.k)
    f0s = opts.get("f0") or []
    f1s = opts.get("f1") or []
    f0s = [f0s] if isinstance(f0s, str) else list(f0s)
    f1s = [f1s] if isinstance(f1s, str) else list(f1s)
    if len(f0s) != len(modes):
        raise ConfigError(f"need one --f0 per mode ({len(modes)} modes, {len(f0s)} files)")
    if f1s and len(f1s) != len(modes):
        raise ConfigError("--f1 must be given for every mode or for none")
    zero = CoefficientProfile.constant(med.grid, 0.0)
    inits = [ModalInitialData(k, read_profile(a, med.grid),
                              read_profile(f1s[i], med.grid) if f1s else zero)
             for i, (k, a) in enumerate(zip(modes, f0s))]
    T = float(opts.T)
    dt = opts.get("dt")
    if dt is None:
        # one step for all modes, stable for the largest wavenumber
        dt = min(default_dt(med, i.wavenumber(med)) for i in inits)
    traces = [simulate_modal_wave(med, i, T, dt, float(opts.beta)).trace for i in inits]
    return inits, traces, T


def cmd_certify(opts) -> int:
    opts.need("medium", "mode", "k", "f0", "T")
    med = _medium(opts)
    inits, traces, T = _modal_inputs(opts, med)
    beta = float(opts.beta)
    mode = opts.mode
    if mode == "observability":
        if len(inits) != 1:
            raise ConfigError("observability mode takes exactly one mode")
        cert = certify_observability(med, inits[0], traces[0], beta, T)
        payload, valid = cert.as_dict(), cert.valid
    elif mode == "finite-fourier":
        cert = certify_finite_fourier(med, inits, traces, beta, T)
        payload, valid = cert.as_dict(), cert.valid
        payload["constants"] = observability_constants(med, beta).as_dict()
    elif mode == "holder":
        opts.need("M_tilde")
        hb = holder_one_side_bound(med, traces, beta, T, float(opts.M_tilde), inits)
        d = hb.as_dict()
        payload = {"lhs": hb.lhs, "rhs": hb.discrete_min, "margin": hb.margin,
                   "constants": observability_constants(med, beta).as_dict(), "holder": d}
        valid = hb.valid
    else:
        raise ConfigError(f"unknown certificate mode {mode!r}")
    payload["valid"] = bool(valid)
    _write_json(_clean(payload), opts.get("out"))
    return 0 if valid else 4


def cmd_sweep(opts) -> int:
    data = {}
    for key in ("medium", "k1", "k2", "beta", "T", "n_points", "dt", "f1", "tikhonov_eps",
                "discrepancy_tau", "include_clean"):
        if opts.get(key) is not None:
            data[key] = opts[key]
    if opts.get("noise_levels") is not None:
        data["noise_levels"] = _float_list(opts.noise_levels)
    if opts.get("seeds") is not None:
        data["seeds"] = _int_list(opts.seeds)
    out = opts.get("out_dir") or opts.get("output_dir")
    if not out:
        raise ConfigError("missing required option: --out-dir")
    cfg = ExperimentConfig.from_dict(data)
    cfg.output_dir = str(out)
    try:
        report = run_pipeline(cfg)
    except PipelineStageError as exc:
        if exc.partial is not None:
            emit_outputs(exc.partial, out)
        raise
    for path in emit_outputs(report, out):
        print(path)
    return 0


def cmd_depth_curve(opts) -> int:
    opts.need("medium", "k")
    med = _medium(opts)
    curve = depth_resolution_curve(med, int(opts.k), float(opts.threshold))
    if opts.get("out"):
        write_csv(opts.out, ("y", "depth", "weight", "resolvable"),
                  zip(curve.y, curve.depth, curve.weight, curve.resolvable))
    summary = {k: v for k, v in curve.as_dict().items() if k not in ("y", "weight", "resolvable")}
    summary["rate_error"] = curve.rate_error
    _write_json(_clean(summary), opts.get("summary"))
    return 0


# --- parser ----------------------------------------------------------------------

S = argparse.SUPPRESS

DEFAULTS = {
    "optical-solve": {},
    "acoustic-simulate": {"beta": 1.0},
    "acoustic-invert": {"beta": 1.0, "eps": DEFAULT_EPS, "max_iter": DEFAULT_MAX_ITER,
                        "tol": DEFAULT_TOL},
    "optical-invert": {"trust_threshold": TRUST_THRESHOLD, "cauchy": "auto"},
    "certify": {"beta": 1.0, "mode": "observability"},
    "sweep": {},
    "depth-curve": {"threshold": TRUST_THRESHOLD},
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="patl", description="Layered-medium photoacoustic "
                                "forward solvers, inversions and stability certificates.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, argument_default=S)
        sp.add_argument("--config", help="JSON file with option values")
        sp.set_defaults(func=func)
        return sp

    def medium_opts(sp, required=True):
        sp.add_argument("--medium", help="medium definition (JSON)")
        sp.add_argument("--n-points", type=int, help="override the grid size")

    sp = add("optical-solve", cmd_optical_solve, "solve the modal optical problem")
    medium_opts(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--out")
    sp.add_argument("--out-h", help="also write the internal datum h = mu_a u")

    sp = add("acoustic-simulate", cmd_acoustic_simulate, "simulate one acoustic mode")
    medium_opts(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--f0")
    sp.add_argument("--f1")
    sp.add_argument("--T", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--out-trace")
    sp.add_argument("--out-energy")

    sp = add("acoustic-invert", cmd_acoustic_invert, "recover modal initial data from a trace")
    medium_opts(sp)
    sp.add_argument("--trace")
    sp.add_argument("--k", type=int)
    sp.add_argument("--T", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--eps", type=float, help="Tikhonov weight")
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--noise-rms", type=float, help="enables discrepancy stopping")
    sp.add_argument("--out")

    sp = add("optical-invert", cmd_optical_invert, "reconstruct D and mu_a from two data")
    sp.add_argument("--h1")
    sp.add_argument("--h2")
    sp.add_argument("--k1", type=int)
    sp.add_argument("--k2", type=int)
    sp.add_argument("--calib", help="D_H=<v>,D_prime_H=<v>[,mu_prime_H=<v>]")
    sp.add_argument("--L", type=float, help="lateral period (default 1, or the medium's)")
    medium_opts(sp)
    sp.add_argument("--trust-threshold", type=float)
    sp.add_argument("--cauchy", choices=("auto", "F", "h1"))
    sp.add_argument("--out")

    sp = add("certify", cmd_certify, "evaluate observability certificates")
    medium_opts(sp)
    sp.add_argument("--mode", choices=("observability", "finite-fourier", "holder"))
    sp.add_argument("--k", help="mode(s), comma separated")
    sp.add_argument("--f0", action="append", help="f0 CSV, once per mode")
    sp.add_argument("--f1", action="append", help="f1 CSV, once per mode")
    sp.add_argument("--T", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--M-tilde", type=float, dest="M_tilde")
    sp.add_argument("--out")

    sp = add("sweep", cmd_sweep, "run the noise/seed stability sweep")
    medium_opts(sp)
    sp.add_argument("--k1", type=int)
    sp.add_argument("--k2", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--noise-levels", help="comma separated")
    sp.add_argument("--seeds", help="comma separated or a:b range")
    sp.add_argument("--tikhonov-eps", type=float)
    sp.add_argument("--out-dir")

    sp = add("depth-curve", cmd_depth_curve, "depth resolution of the optical weight")
    medium_opts(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out")
    sp.add_argument("--summary", help="JSON summary path (default stdout)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="patl: %(levelname)s: %(message)s")
    try:
        opts = merge_options(args, DEFAULTS[args.command])
        opts.pop("verbose", None)
        return args.func(opts)
    except PatlError as exc:
        print(f"patl: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError) as exc:
        print(f"patl: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"patl: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
