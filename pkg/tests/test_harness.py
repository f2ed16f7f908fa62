import json
import math

import numpy as np
import pytest

from patl.errors import ConfigError, HypothesisViolation
from patl.harness import (REFERENCE_MEDIUM, ExperimentConfig, PipelineStageError, SweepRecord,
                          assemble_report, depth_resolution_curve, emit_outputs,
                          fit_loglog_slope, interpolation_chain, interpolation_constant,
                          reference_medium, run_pipeline, thread_cap, write_csv)
from patl.medium import check_admissibility

from conftest import constant_medium

SMALL = {"n_points": 129, "noise_levels": [1e-3, 1e-2], "seeds": [0, 1]}


def rec(eps, seed, err):
    return SweepRecord(eps, seed, eps**2, math.sqrt(eps), err, err, 0.0, 0.0, 0.0, (1, 1))


def test_reference_medium_admissible():
    med = reference_medium(257)
    assert check_admissibility(med)
    assert med.width_L == pytest.approx(2 * math.pi)
    assert med.absorption.values[128] == pytest.approx(3.2)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PATL_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("PATL_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_cap()
    monkeypatch.setenv("PATL_THREADS", "0")
    with pytest.raises(ConfigError):
        thread_cap()
    monkeypatch.delenv("PATL_THREADS")
    assert thread_cap(5) == 5


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"k1": 2, "k2": 1}).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"noise_levels": [1e-2, 1e-3]}).validate()
    with pytest.raises(HypothesisViolation):
        ExperimentConfig.from_dict({"T": 1.0}).validate()
    (tmp_path / "m.json").write_text(json.dumps(REFERENCE_MEDIUM))
    (tmp_path / "c.json").write_text(json.dumps({"medium": "m.json", "k1": 1, "k2": 3}))
    cfg = ExperimentConfig.from_file(tmp_path / "c.json")
    assert cfg.k2 == 3 and cfg.load_medium().grid.n_points == REFERENCE_MEDIUM["n_points"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")


def test_loglog_slope_oracle():
    x = np.array([1e-4, 1e-3, 1e-2])
    assert fit_loglog_slope(x, 3 * x**0.5) == pytest.approx(0.5)
    assert math.isnan(fit_loglog_slope([1.0], [1.0]))


def test_report_calibration_and_violations():
    # errors proportional to eps: C_emp is fixed at the smallest level, so larger levels violate
    recs = [rec(e, s, 2 * e) for e in (1e-4, 1e-3, 1e-2) for s in (0, 1)]
    rep = assemble_report(recs)
    assert rep.slope_mu == pytest.approx(1.0)
    assert rep.C_emp_D == pytest.approx(2e-4 / 1e-2)
    assert rep.violations_D == 4
    # errors proportional to sqrt(eps) never violate
    rep = assemble_report([rec(e, s, 5 * math.sqrt(e)) for e in (1e-4, 1e-2) for s in (0, 1)])
    assert rep.violations_mu == 0 and rep.slope_D == pytest.approx(0.5)


def test_interpolation_chain():
    C = interpolation_constant()
    assert 0 < C < 10
    assert interpolation_constant() == C  # cached
    b = interpolation_chain(4.0, 9.0, constant=2.0)
    assert b.bound == pytest.approx(12.0) and b.holds is None
    y = np.linspace(0, 1, 257)
    d = 1e-3 * np.sin(2 * np.pi * y)
    from patl._numerics import sobolev_norm
    h = y[1]
    chk = interpolation_chain(sobolev_norm(d, h, 1), sobolev_norm(d, h, 3), profiles=(d, 0 * d),
                              h_step=h)
    assert chk.holds
    with pytest.raises(ValueError):
        interpolation_chain(-1.0, 1.0)


def test_depth_curve_constant_medium():
    med = constant_medium(2049, mu=9.0)
    c = depth_resolution_curve(med, 0, threshold=1e-4)
    assert c.kappa_m == pytest.approx(9.0) and c.predicted_rate == pytest.approx(6.0)
    assert c.rate_error < 0.05
    # the weight is sinh(3 y)^2 / sinh(3)^2; it equals 1e-4 at depth 1 - asinh(0.01 sinh 3) / 3
    assert c.crossing_depth == pytest.approx(1 - math.asinh(0.01 * math.sinh(3.0)) / 3, abs=1e-5)
    assert c.resolvable[-1] and not c.resolvable[0]


def test_write_csv_format(tmp_path):
    p = write_csv(tmp_path / "x.csv", ("a", "b"), [(0.1, True), (2, np.float64(1 / 3))])
    assert p.read_text() == "a,b\n0.10000000000000001,1\n2,0.33333333333333331\n"


def test_pipeline_small_and_outputs(tmp_path):
    rep = run_pipeline(ExperimentConfig.from_dict(SMALL), threads=2)
    assert len(rep.records) == 5 and rep.records[0].epsilon == 0.0
    assert all(r.rhs_bound > 0 for r in rep.noisy)
    assert rep.records[0].boundary_misfit == 0.0
    paths = emit_outputs(rep, tmp_path / "out")
    names = {p.split("/")[-1] for p in paths}
    assert {"sweep.csv", "summary.json", "depth_curve.csv", "stability.dat"} <= names
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["n_records"] == 5 and "units" in summary["constants"]


def test_pipeline_independent_of_thread_count(tmp_path):
    a = run_pipeline(ExperimentConfig.from_dict(SMALL), threads=1)
    b = run_pipeline(ExperimentConfig.from_dict(SMALL), threads=4)
    emit_outputs(a, tmp_path / "a")
    emit_outputs(b, tmp_path / "b")
    for name in ("sweep.csv", "depth_curve.csv", "stability.dat"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pipeline_stage_failure_carries_partial_report(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "tikhonov_eps": float("nan")})
    with pytest.raises(PipelineStageError) as info:
        run_pipeline(cfg, threads=1)
    err = info.value
    assert err.stage == "acoustic-inversion" and err.partial is not None
    assert err.exit_code in (2, 3)
    assert "summary.json" in emit_outputs(err.partial, tmp_path)[-1]
