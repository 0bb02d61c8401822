import json

import numpy as np
import pytest

from socdw import io
from socdw.config import ConfigError, RunConfig, RunSettings, ScanRange, from_mapping, load
from socdw.model import ModelParams, SpatialGrid
from socdw.scans import (
    find_localization_peaks,
    map_points,
    on_sample_grid,
    run_eigen,
    run_gamma_scan,
    run_omega_scan,
    run_single,
)

SMALL = {"grid": {"n": 128}}


# --- configuration ------------------------------------------------------------------

def test_nested_flat_and_dotted_keys_agree(tmp_path):
    nested = from_mapping({"model": {"gamma": 1.5}, "grid": {"n": 256},
                           "scan": {"kind": "omega-scan", "start": 1.4, "stop": 1.6, "count": 5}})
    flat = from_mapping({"gamma": 1.5, "n": 256, "scan.kind": "omega-scan",
                         "scan.start": 1.4, "scan.stop": 1.6, "scan.count": 5})
    assert nested == flat
    path = tmp_path / "c.yaml"
    path.write_text("gamma: 1.5\nn: 256\nscan:\n  kind: omega-scan\n  start: 1.4\n  stop: 1.6\n  count: 5\n")
    assert load(path) == nested
    assert load(path, ["model.gamma=0.7"]).params.gamma == 0.7


def test_defaults():
    cfg = from_mapping({})
    assert cfg.kind == "single-run"
    assert cfg.params == ModelParams() and cfg.grid == SpatialGrid()
    assert cfg.run.dt == 1e-3 and cfg.run.t_final is None and cfg.run.initial == "1-"
    assert from_mapping({"scan": {"kind": "omega-scan", "start": 1, "stop": 2}}).scan.count == 200
    assert from_mapping({"scan": {"kind": "gamma-scan", "start": 0.2, "stop": 4.2}}).scan.count == 400


@pytest.mark.parametrize("tree", [
    {"gama": 1.0},
    {"scan": {"kind": "omega-scan", "start": 2.0, "stop": 1.0}},
    {"scan": {"kind": "omega-scan", "start": 1.0, "stop": 2.0, "count": 0}},
    {"scan": {"kind": "bogus"}},
    {"scan": {"kind": "gamma-scan", "variable": "omega", "start": 0, "stop": 1}},
    {"run": {"dt": -1}},
    {"run": {"initial": "3-"}},
    {"n": 100},
    {"model": {"gamma": 1.0}, "gamma": 2.0},
])
def test_invalid_configs(tree):
    with pytest.raises(ConfigError):
        from_mapping(tree)


def test_count_one_needs_no_range():
    cfg = from_mapping({"omega": 1.7, "scan": {"kind": "omega-scan", "count": 1}})
    assert list(cfg.scan.values()) == [1.7]


def test_with_kind_reuses_scan_options():
    cfg = from_mapping({"scan": {"start": 0.5, "stop": 1.0, "count": 3}})
    assert cfg.scan is None
    assert cfg.with_kind("coupling-scan").scan == ScanRange("gamma", 0.5, 1.0, 3)
    assert cfg.with_kind("spectrum").run.spectrum


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load(path)


def test_fmt():
    assert io.fmt(-0.0) == "0"
    assert io.fmt(1 / 3) == "0.333333333333"
    assert io.fmt(True) == "true"
    assert io.fmt(float("nan")) == "nan"
    assert io.fmt(7) == "7"


# --- scan engine --------------------------------------------------------------------

def _boom(x):
    if x == 2:
        raise ValueError("bad point")
    return x * x


def test_map_points_records_failures():
    out = map_points(_boom, [(1,), (2,), (3,)], workers=1)
    assert [o[0] for o in out] == ["ok", "failed", "ok"]
    assert out[2][1] == 9 and "bad point" in out[1][2]


def test_map_points_parallel_matches_serial():
    args = [(i,) for i in range(6)]
    assert map_points(_boom, args, workers=2) == map_points(_boom, args, workers=1)


def test_localization_peaks():
    g = np.linspace(0, 1, 11)
    p = np.array([0.95, 0.5, 0.5, 0.99, 0.5, 0.4, 0.3, 0.2, 0.97, 0.6, 0.5])
    assert np.allclose(find_localization_peaks(g, p), [0.0, 0.3, 0.8])


def _cfg(kind, scan=None, **run):
    return RunConfig(kind=kind, params=ModelParams(well_separation=1.7, gamma=1.112),
                     grid=SpatialGrid(n=128), scan=scan,
                     run=RunSettings(**{"t_final": 2.0, "dt": 1e-2, "sample_stride": 20, **run}))


def test_coupling_scan_is_deterministic(tmp_path):
    cfg = _cfg("coupling-scan", ScanRange("gamma", 0.9, 1.2, 4))
    a = run_gamma_scan(cfg, tmp_path / "a", workers=1)
    b = run_gamma_scan(cfg, tmp_path / "b", workers=2)
    assert (tmp_path / "a/coupling_scan.csv").read_bytes() == (tmp_path / "b/coupling_scan.csv").read_bytes()
    header, rows = io.read_csv(tmp_path / "a/coupling_scan.csv")
    assert header[0] == "gamma" and len(rows) == 4
    values = [float(r[0]) for r in rows]
    assert values == sorted(set(values))
    manifest = json.loads(a.manifest.read_text())
    assert [f["path"] for f in manifest["files"]] == ["coupling_scan.csv"]
    assert all(p["status"] == "ok" for p in manifest["points"])
    assert b.failed == 0


def test_omega_scan_failure_is_recorded(tmp_path):
    # omega = 40 leaves fewer than 100 steps per period at dt = 1e-2
    cfg = _cfg("omega-scan", ScanRange("omega", 1.6, 40.0, 2))
    out = run_omega_scan(cfg, tmp_path)
    assert out.failed == 1
    header, rows = io.read_csv(tmp_path / "omega_scan.csv")
    assert header[-2:] == ["t_window", "status"]
    assert rows[0][-1] == "ok" and rows[1][-1] == "failed" and rows[1][1] == "nan"
    points = json.loads(out.manifest.read_text())["points"]
    assert points[1]["status"] == "failed" and "steps per drive period" in points[1]["error"]


def test_omega_scan_count_one_is_single_run(tmp_path):
    out = run_omega_scan(_cfg("omega-scan", ScanRange("omega", 1.617, 1.617, 1)), tmp_path)
    assert (tmp_path / "trajectory.csv").exists()
    assert out.extra["record"].times[-1] == pytest.approx(2.0)


def test_gamma_scan_outputs(tmp_path):
    out = run_gamma_scan(_cfg("gamma-scan", ScanRange("gamma", 1.0, 1.2, 3)), tmp_path)
    header, rows = io.read_csv(tmp_path / "gamma_scan.csv")
    assert header[:3] == ["gamma", "p_left", "p_right"] and len(rows) == 3
    assert all(abs(float(r[1]) + float(r[2]) - 1) < 1e-8 for r in rows)
    assert (tmp_path / "localization_peaks.csv").exists()
    assert out.failed == 0


def test_quasienergy_scan_over_omega(tmp_path):
    cfg = _cfg("quasienergy-scan", ScanRange("omega", 0.3, 2.0, 6))
    out = run_gamma_scan(cfg, tmp_path)
    header, rows = io.read_csv(tmp_path / "quasienergy_scan.csv")
    assert header[0] == "omega" and len(rows) == 6
    vals = np.array([[float(v) for v in r[1:5]] for r in rows])
    assert np.all(vals > -1) and np.all(vals <= 1)
    assert out.extra["multiphoton"][0][0] == 1


def test_run_gamma_scan_rejects_other_kinds(tmp_path):
    with pytest.raises(ValueError):
        run_gamma_scan(_cfg("single-run"), tmp_path)


def test_single_run_with_four_state(tmp_path):
    out = run_single(_cfg("single-run", four_state=True), tmp_path)
    names = sorted(f.name for f in out.files)
    assert names == ["four_state.csv", "trajectory.csv"]
    notes = json.loads(out.manifest.read_text())["notes"]
    assert notes["four_state_max_deviation"] < 0.01
    assert notes["max_norm_drift"] < 1e-10


def test_undriven_run_stays_left(tmp_path):
    cfg = _cfg("single-run")
    cfg = RunConfig(kind="single-run", params=cfg.params.replace(omega1=0.0), grid=cfg.grid,
                    run=RunSettings(t_final=50.0, dt=1e-2, sample_stride=100))
    rec = run_single(cfg, tmp_path).extra["record"]
    assert rec.p_left[0] > 0.99
    assert np.ptp(rec.p_left) < 1e-3


def test_spectrum_window_check(tmp_path):
    with pytest.raises(ValueError, match="need t_final >= "):
        run_single(_cfg("spectrum", spectrum=True), tmp_path)


def test_eigen_outputs(tmp_path):
    cfg = RunConfig(params=ModelParams(), grid=SpatialGrid(n=128), run=RunSettings(wavefunctions=True))
    out = run_eigen(cfg, tmp_path)
    names = {f.name for f in out.files}
    assert {"eigen.csv", "localized.csv", "resonances.csv", "state_11.csv"} <= names
    header, rows = io.read_csv(tmp_path / "state_22.csv")
    assert header == ["x", "re_up", "im_up", "re_down", "im_down"] and len(rows) == 128


def test_on_sample_grid():
    assert on_sample_grid(1.0, 1e-2, 30) == pytest.approx(1.2)
    assert on_sample_grid(0.9, 1e-2, 30) == pytest.approx(0.9)


@pytest.mark.parametrize("t_final", [None, 1400.05])
def test_spectrum_run_with_unaligned_window(tmp_path, t_final):
    # strong drive keeps the beat period short; the auto window is rounded to the sampling grid
    params = ModelParams(well_separation=1.7, gamma=1.5, omega=1.53, omega1=1.0)
    cfg = RunConfig(kind="spectrum", params=params, grid=SpatialGrid(n=128),
                    run=RunSettings(t_final=t_final, dt=1e-2, sample_stride=50, spectrum=True))
    out = run_single(cfg, tmp_path)
    steps = np.diff(out.extra["record"].times)
    assert (tmp_path / "spectrum.csv").exists()
    if t_final is None:
        assert np.allclose(steps, 0.5)
