"""Scan engine: runs every scan type from a RunConfig and writes CSV plus a manifest.

Scan points are independent tasks. With ``workers > 1`` they are farmed out
to a process pool (one task at a time per worker, so idle workers pick up the
next point); results are gathered and written in sweep order by the parent.
"""
from __future__ import annotations

import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from . import __version__, io
from . import floquet as fq
from .config import RunConfig
from .dynamics import PropagationPlan, evolve
from .model import ModelParams, SpatialGrid, SpinorField
from .observables import TrajectoryProbe, beat_spectrum
from .stationary import (
    LABELS,
    EigenSolution,
    localized_basis,
    solve_stationary,
    write_eigen_csv,
    write_wavefunction_csv,
)

logger = logging.getLogger(__name__)

AVERAGE_COLUMNS = ("p_left", "p_right", "sx", "sy", "sz", "p11", "p12", "p21", "p22", "p_all")
COUPLING_PAIRS = (("11", "21"), ("11", "22"), ("12", "21"), ("12", "22"))
SPECTRUM_BEATS = 5.0


# --- manifest --------------------------------------------------------------------

@dataclass
class Manifest:
    out_dir: Path
    config: RunConfig
    started: float = field(default_factory=time.time)
    points: list = field(default_factory=list)
    files: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add_file(self, path, status: str = "ok"):
        rel = str(Path(path).resolve().relative_to(self.out_dir.resolve()))
        if any(f["path"] == rel for f in self.files):
            raise ValueError(f"{rel} already in manifest")
        self.files.append({"path": rel, "status": status})

    def add_point(self, index: int, value, status: str, error: str = ""):
        entry = {"index": int(index), "value": value, "status": status}
        if error:
            entry["error"] = error
        self.points.append(entry)

    def write(self) -> Path:
        path = self.out_dir / "manifest.json"
        cfg = self.config
        body = {
            "software": "socdw",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kind": cfg.kind,
            "config": cfg.snapshot(),
            "grid": {**cfg.grid.as_dict(), "dx": cfg.grid.dx},
            "time_stepping": {"dt": cfg.run.dt, "sample_stride": cfg.run.sample_stride},
            "started_utc": datetime.fromtimestamp(self.started, timezone.utc).isoformat(),
            "wall_clock_s": round(time.time() - self.started, 3),
            "points": self.points,
            "files": self.files,
            "notes": self.notes,
        }
        path.write_text(json.dumps(body, indent=2, sort_keys=False, default=_jsonable) + "\n",
                        encoding="utf-8")
        return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


@dataclass(frozen=True)
class ScanOutcome:
    out_dir: Path
    files: tuple
    manifest: Path
    rows: list
    extra: dict = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.rows if r and r[-1] != "ok")


# --- task execution --------------------------------------------------------------

def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return max(1, os.cpu_count() or 1)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return int(workers)


def _guarded(payload):
    func, args = payload
    try:
        return "ok", func(*args), ""
    except Exception as exc:  # recorded per point; the scan goes on
        logger.warning("scan point failed: %s", exc)
        return "failed", None, f"{type(exc).__name__}: {exc}"


def map_points(func, arg_list, workers: int = 1) -> list:
    """Evaluate ``func(*args)`` for every entry, returning (status, value, error) in order."""
    payloads = [(func, args) for args in arg_list]
    if workers <= 1 or len(payloads) <= 1:
        return [_guarded(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
        return list(pool.map(_guarded, payloads, chunksize=1))


# --- single-point physics ----------------------------------------------------------

def initial_state(solution: EigenSolution, name: str = "1-") -> SpinorField:
    if name in LABELS:
        return solution.state(name)
    return localized_basis(solution)[name]


def on_sample_grid(t: float, dt: float, stride: int) -> float:
    """Round ``t`` up to a whole number of sampling intervals so samples stay uniform."""
    interval = dt * stride
    return math.ceil(t / interval - 1e-9) * interval


def auto_window(solution: EigenSolution, params: ModelParams) -> float:
    if not params.driven:
        return 2000.0
    catalog = fq.resonance_catalog(solution, params.omega1)
    return fq.averaging_window(catalog, params.omega)


def averaged_point(params: ModelParams, grid: SpatialGrid, dt: float, stride: int,
                   t_final: float | None, initial: str,
                   solution: EigenSolution | None = None) -> tuple:
    """Evolve from ``initial`` and return (window, averages in AVERAGE_COLUMNS order)."""
    solution = solution or solve_stationary(params, grid)
    window = t_final or on_sample_grid(auto_window(solution, params), dt, stride)
    plan = PropagationPlan(window, dt, stride)
    record = evolve(initial_state(solution, initial), plan, params, grid,
                    TrajectoryProbe(grid, solution))
    avg = record.averages()
    return window, tuple(avg[c] for c in AVERAGE_COLUMNS)


def coupling_point(params: ModelParams, grid: SpatialGrid) -> tuple:
    sol = solve_stationary(params, grid)
    gamma = sol.sigma_x_matrix().real
    pt = [row["pt"] for row in sol.symmetry_table]
    v = [0.5 * params.omega1 * gamma[sol.index(a), sol.index(b)] for a, b in COUPLING_PAIRS]
    return (*sol.energies, *pt, *v)


def quasienergy_point(params: ModelParams, grid: SpatialGrid,
                      solution: EigenSolution | None = None) -> fq.FloquetStates:
    sol = solution or solve_stationary(params, grid)
    return fq.quasienergies(fq.build_four_state(sol, params))


def find_localization_peaks(values, p_left, height: float = 0.9) -> np.ndarray:
    """Sweep values of local maxima of the averaged left-well probability."""
    p_left = np.asarray(p_left, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(p_left)
    idx, _ = find_peaks(np.where(ok, p_left, -1.0), height=height)
    # plateaus touching the sweep ends are not seen by find_peaks
    extra = [i for i in (0, len(p_left) - 1)
             if len(p_left) > 1 and ok[i] and p_left[i] >= height
             and p_left[i] >= p_left[1 if i == 0 else -2]]
    idx = np.unique(np.concatenate([idx, np.array(extra, dtype=int)]))
    return values[idx]


# --- runners -------------------------------------------------------------------------

def _prepare(cfg: RunConfig, out_dir) -> tuple[Path, Manifest]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out, Manifest(out, cfg)


def _finish(manifest: Manifest, files: list, rows: list, extra=None) -> ScanOutcome:
    for f in files:
        manifest.add_file(f)
    path = manifest.write()
    return ScanOutcome(manifest.out_dir, tuple(files), path, rows, extra or {})


def _average_rows(values, results, manifest, name):
    rows = []
    for i, (value, (status, res, err)) in enumerate(zip(values, results)):
        manifest.add_point(i, float(value), status, err)
        if status == "ok":
            window, avg = res
            rows.append((value, *avg, window, status))
        else:
            rows.append((value, *([math.nan] * len(AVERAGE_COLUMNS)), math.nan, status))
    header = (name, *AVERAGE_COLUMNS, "t_window", "status")
    return header, rows


def run_omega_scan(cfg: RunConfig, out_dir, workers: int | None = None) -> ScanOutcome:
    """Time averages against the drive frequency; eigenstates are solved once."""
    cfg = cfg.with_kind("omega-scan")
    if cfg.scan.count == 1:
        single = replace(cfg, kind="single-run", scan=None,
                         params=cfg.params.replace(omega=cfg.scan.start))
        return run_single(single, out_dir, workers)
    out, manifest = _prepare(cfg, out_dir)
    workers = resolve_workers(workers)
    solution = solve_stationary(cfg.params, cfg.grid)
    values = cfg.scan.values()
    run = cfg.run
    args = [
        (cfg.params.replace(omega=float(w)), cfg.grid, run.dt, run.sample_stride,
         run.t_final, run.initial, solution)
        for w in values
    ]
    results = map_points(averaged_point, args, workers)
    header, rows = _average_rows(values, results, manifest, "omega")
    files = [io.write_csv(out / "omega_scan.csv", header, rows)]
    catalog = fq.resonance_catalog(solution, cfg.params.omega1)
    files.append(catalog.to_csv(out / "resonances.csv"))
    return _finish(manifest, files, rows)


def run_gamma_scan(cfg: RunConfig, out_dir, workers: int | None = None) -> ScanOutcome:
    """gamma-scan, coupling-scan or quasienergy-scan, chosen by ``cfg.kind``."""
    if cfg.kind not in ("gamma-scan", "coupling-scan", "quasienergy-scan"):
        raise ValueError(f"run_gamma_scan cannot run kind {cfg.kind!r}")
    out, manifest = _prepare(cfg, out_dir)
    workers = resolve_workers(workers)
    values = cfg.scan.values()
    run = cfg.run
    files, extra = [], {}
    if cfg.kind == "gamma-scan":
        args = [
            (cfg.params.replace(gamma=float(g)), cfg.grid, run.dt, run.sample_stride,
             run.t_final, run.initial)
            for g in values
        ]
        results = map_points(averaged_point, args, workers)
        header, rows = _average_rows(values, results, manifest, "gamma")
        files.append(io.write_csv(out / "gamma_scan.csv", header, rows))
        peaks = find_localization_peaks(values, [r[1] for r in rows])
        extra["localization_peaks"] = peaks
        files.append(io.write_csv(out / "localization_peaks.csv", ("gamma",), ((p,) for p in peaks)))
    elif cfg.kind == "coupling-scan":
        args = [(cfg.params.replace(gamma=float(g)), cfg.grid) for g in values]
        results = map_points(coupling_point, args, workers)
        header = ("gamma", "e11", "e12", "e21", "e22", "pt11", "pt12", "pt21", "pt22",
                  *(f"v_{a}_{b}" for a, b in COUPLING_PAIRS), "status")
        rows = []
        for i, (g, (status, res, err)) in enumerate(zip(values, results)):
            manifest.add_point(i, float(g), status, err)
            rows.append((g, *(res if status == "ok" else [math.nan] * 12), status))
        files.append(io.write_csv(out / "coupling_scan.csv", header, rows))
    else:
        rows, spectrum = _quasienergy_scan(cfg, values, workers, manifest)
        files.append(spectrum.to_csv(out / "quasienergy_scan.csv", name=cfg.scan.variable))
        if cfg.scan.variable == "omega":
            sol = solve_stationary(cfg.params, cfg.grid)
            gap = sol.energy("22") - sol.energy("11")
            lo, hi = values.min(), values.max()
            marks = [(m, gap / m) for m in range(1, 64) if lo <= gap / m <= hi]
            extra["multiphoton"] = marks
            files.append(io.write_csv(out / "multiphoton_resonances.csv", ("m", "omega"), marks))
    return _finish(manifest, files, rows, extra)


def _quasienergy_scan(cfg, values, workers, manifest):
    if cfg.scan.variable == "omega":
        sol = solve_stationary(cfg.params, cfg.grid)
        args = [(cfg.params.replace(omega=float(w)), cfg.grid, sol) for w in values]
    else:
        args = [(cfg.params.replace(gamma=float(g)), cfg.grid) for g in values]
    results = map_points(quasienergy_point, args, workers)
    good_values, states, rows = [], [], []
    for i, (v, (status, res, err)) in enumerate(zip(values, results)):
        manifest.add_point(i, float(v), status, err)
        rows.append((v, status))
        if status == "ok":
            good_values.append(v)
            states.append(res)
    return rows, fq.track_branches(good_values, states)


def spectrum_targets(solution: EigenSolution, params: ModelParams) -> tuple:
    """(scenario, two-level entry, labelled analytic frequencies, beat frequency)."""
    catalog = fq.resonance_catalog(solution, params.omega1)
    entry = catalog.nearest(params.omega)
    freqs = fq.analytic_frequencies(catalog.scenario, entry)
    mags = sorted(abs(f) for f in freqs.values())
    beat = mags[0] if len(mags) == 1 else min(b - a for a, b in zip(mags, mags[1:]))
    return catalog.scenario, entry, freqs, beat


def run_single(cfg: RunConfig, out_dir, workers: int | None = None) -> ScanOutcome:
    """One trajectory with optional four-state comparison and beat spectrum."""
    if cfg.kind not in ("single-run", "spectrum"):
        cfg = cfg.with_kind("single-run")
    run = cfg.run
    if cfg.kind == "spectrum" and not run.spectrum:
        run = replace(run, spectrum=True)
    out, manifest = _prepare(cfg, out_dir)
    params, grid = cfg.params, cfg.grid
    solution = solve_stationary(params, grid)
    files, extra = [], {}
    targets = None
    if run.spectrum:
        if not params.driven:
            raise ValueError("a beat spectrum needs a driven run (omega1 > 0)")
        targets = spectrum_targets(solution, params)
        needed = SPECTRUM_BEATS * 2 * math.pi / targets[3]
        t_final = run.t_final or on_sample_grid(needed, run.dt, run.sample_stride)
        if t_final < needed * (1 - 1e-9):
            raise ValueError(
                f"t_final={t_final:g} cannot resolve the beat frequency "
                f"{targets[3]:.6g}; need t_final >= {needed:.6g}"
            )
    else:
        t_final = run.t_final or on_sample_grid(auto_window(solution, params),
                                                run.dt, run.sample_stride)
    plan = PropagationPlan(t_final, run.dt, run.sample_stride)
    record = evolve(initial_state(solution, run.initial), plan, params, grid,
                    TrajectoryProbe(grid, solution))
    manifest.add_point(0, params.as_dict(), "ok")
    files.append(record.to_csv(out / "trajectory.csv"))
    extra["record"] = record
    manifest.notes["max_norm_drift"] = float(np.max(np.abs(record.norm - record.norm[0])))
    manifest.notes["averages"] = record.averages()
    if run.four_state:
        model = fq.build_four_state(solution, params)
        c0 = _four_state_initial(solution, run.initial)
        traj = fq.integrate_four_state(model, c0, plan.n_steps * plan.dt,
                                       sample_interval=plan.sample_stride * plan.dt)
        pops = traj.populations()
        n = min(len(traj.times), len(record.times))
        files.append(io.write_csv(
            out / "four_state.csv", ("t", "p11", "p12", "p21", "p22", "norm"),
            ((t, *p, nrm) for t, p, nrm in zip(traj.times, pops, traj.norm())),
        ))
        dev = float(np.max(np.abs(pops[:n] - record.populations()[:n])))
        manifest.notes["four_state_max_deviation"] = dev
        extra["four_state"] = traj
    if targets is not None:
        scenario, entry, freqs, beat = targets
        # a t_final off the sampling grid adds one short final interval; leave it out
        keep = len(record.times)
        if keep > 2 and not np.isclose(record.times[-1] - record.times[-2],
                                       record.times[1] - record.times[0]):
            keep -= 1
        spec = beat_spectrum(record.p_left[:keep], record.times[:keep], beat_frequency=beat,
                             min_beats=SPECTRUM_BEATS)
        files.append(spec.to_csv(out / "spectrum.csv"))
        files.append(spec.peaks_to_csv(out / "spectrum_peaks.csv", freqs))
        manifest.notes["scenario"] = scenario
        manifest.notes["analytic_frequencies"] = freqs
        manifest.notes["coupling"] = entry.coupling
        extra["spectrum"] = spec
        extra["analytic_frequencies"] = freqs
    return _finish(manifest, files, [(t_final, "ok")], extra)


def _four_state_initial(solution: EigenSolution, name: str) -> np.ndarray:
    if name in LABELS:
        c = np.zeros(4, dtype=complex)
        c[solution.index(name)] = 1
        return c
    i = int(name[0])
    sign = -1.0 if name[1] == "-" else 1.0
    c = np.zeros(4, dtype=complex)
    c[2 * (i - 1)] = sign / math.sqrt(2)
    c[2 * (i - 1) + 1] = 1 / math.sqrt(2)
    return c


def run_eigen(cfg: RunConfig, out_dir, workers: int | None = None) -> ScanOutcome:
    """Eigenstructure, symmetry table, localized basis and resonance catalog."""
    out, manifest = _prepare(cfg, out_dir)
    sol = solve_stationary(cfg.params, cfg.grid)
    files = [write_eigen_csv(sol, out / "eigen.csv")]
    basis = localized_basis(sol)
    files.append(io.write_csv(
        out / "localized.csv", ("state", "x_mean", "sx"),
        ((k, basis.positions[k], basis.spin_x[k]) for k in ("1-", "1+", "2-", "2+")),
    ))
    files.append(fq.resonance_catalog(sol, cfg.params.omega1).to_csv(out / "resonances.csv"))
    if cfg.run.wavefunctions:
        for label in LABELS:
            files.append(write_wavefunction_csv(sol.state(label), cfg.grid, out / f"state_{label}.csv"))
    manifest.add_point(0, cfg.params.as_dict(), "ok")
    manifest.notes["residuals"] = sol.residuals
    manifest.notes["warnings"] = list(basis.warnings)
    return _finish(manifest, files, [(sol.energies, "ok")], {"solution": sol})
