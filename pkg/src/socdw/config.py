"""Run configuration: one YAML file, canonical key names, documented defaults.

Keys may be written flat (``gamma: 1.5``), nested (``model: {gamma: 1.5}``,
``scan: {kind: omega-scan}``) or dotted (``scan.kind: omega-scan``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .model import GRID_NAMES, PARAM_NAMES, ModelParams, SpatialGrid

SCAN_KINDS = (
    "omega-scan",
    "gamma-scan",
    "coupling-scan",
    "quasienergy-scan",
    "single-run",
    "spectrum",
)
RANGED_KINDS = ("omega-scan", "gamma-scan", "coupling-scan", "quasienergy-scan")
DEFAULT_COUNTS = {"omega-scan": 200, "gamma-scan": 400, "coupling-scan": 400, "quasienergy-scan": 400}
DEFAULT_VARIABLE = {
    "omega-scan": "omega",
    "gamma-scan": "gamma",
    "coupling-scan": "gamma",
    "quasienergy-scan": "gamma",
}
INITIAL_STATES = ("1-", "1+", "2-", "2+", "11", "12", "21", "22")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanRange:
    variable: str
    start: float
    stop: float
    count: int

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start], dtype=float)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class RunSettings:
    """Time integration and output options.

    ``t_final=None`` selects the averaging window automatically.
    """

    t_final: float | None = None
    dt: float = 1e-3
    sample_stride: int = 100
    initial: str = "1-"
    four_state: bool = False
    spectrum: bool = False
    wavefunctions: bool = False


@dataclass(frozen=True)
class RunConfig:
    kind: str = "single-run"
    params: ModelParams = field(default_factory=ModelParams)
    grid: SpatialGrid = field(default_factory=SpatialGrid)
    scan: ScanRange | None = None
    run: RunSettings = field(default_factory=RunSettings)
    scan_options: tuple = ()  # raw scan keys, kept so other kinds can re-use them

    def with_kind(self, kind: str) -> RunConfig:
        """Re-validate the configuration for another run kind (CLI subcommand)."""
        if kind == self.kind:
            return self
        scan = None
        if kind in RANGED_KINDS:
            scan = _scan_range(kind, dict(self.scan_options), self.params)
        run = self.run
        if kind == "spectrum" and not run.spectrum:
            run = replace(run, spectrum=True)
        return _checked(replace(self, kind=kind, scan=scan, run=run))

    def snapshot(self) -> dict:
        """Fully expanded plain-dict view (used in manifests)."""
        out = {"kind": self.kind, "model": self.params.as_dict(), "grid": self.grid.as_dict()}
        if self.scan is not None:
            out["scan"] = _scan_dict(self.scan)
        out["run"] = {f.name: getattr(self.run, f.name) for f in fields(RunSettings)}
        return out


def _scan_dict(scan: ScanRange | None) -> dict:
    if scan is None:
        return {}
    return {"variable": scan.variable, "start": scan.start, "stop": scan.stop, "count": scan.count}


def flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


_SECTION_ALIASES = {"model.": "", "grid.": ""}


def _canonical(flat: dict) -> dict:
    out = {}
    for key, value in flat.items():
        for prefix, repl in _SECTION_ALIASES.items():
            if key.startswith(prefix):
                key = repl + key[len(prefix):]
                break
        if key in out:
            raise ConfigError(f"key {key!r} given twice")
        out[key] = value
    return out


_RUN_KEYS = {f.name for f in fields(RunSettings)}
_SCAN_KEYS = {"kind", "variable", "start", "stop", "count"}


def _scan_range(kind: str, raw: dict, params: ModelParams) -> ScanRange:
    variable = raw.get("variable", DEFAULT_VARIABLE[kind])
    if variable not in ("gamma", "omega"):
        raise ConfigError(f"scan.variable must be 'gamma' or 'omega', got {variable!r}")
    if kind == "omega-scan" and variable != "omega":
        raise ConfigError("omega-scan sweeps omega")
    if kind in ("gamma-scan", "coupling-scan") and variable != "gamma":
        raise ConfigError(f"{kind} sweeps gamma")
    count = raw.get("count", DEFAULT_COUNTS[kind])
    if isinstance(count, bool) or int(count) != count or int(count) < 1:
        raise ConfigError(f"scan.count must be a positive integer, got {count!r}")
    count = int(count)
    if "start" not in raw:
        if count != 1:
            raise ConfigError("scan.start is required")
        start = getattr(params, variable)
    else:
        start = float(raw["start"])
    stop = float(raw.get("stop", start))
    if count > 1 and not start < stop:
        raise ConfigError(f"scan needs start < stop, got {start} .. {stop}")
    return ScanRange(variable, start, stop, count)


def _checked(cfg: RunConfig) -> RunConfig:
    run = cfg.run
    if run.t_final is not None and not run.t_final > 0:
        raise ConfigError("run.t_final must be positive")
    if not run.dt > 0:
        raise ConfigError("run.dt must be positive")
    if run.sample_stride < 1:
        raise ConfigError("run.sample_stride must be >= 1")
    if run.initial not in INITIAL_STATES:
        raise ConfigError(f"run.initial must be one of {INITIAL_STATES}")
    if cfg.kind in RANGED_KINDS and cfg.scan is None:
        raise ConfigError(f"{cfg.kind} needs a scan section")
    return cfg


def from_mapping(tree: dict | None) -> RunConfig:
    flat = _canonical(flatten(tree or {}))
    known = set(PARAM_NAMES) | set(GRID_NAMES) | {f"scan.{k}" for k in _SCAN_KEYS} | {
        f"run.{k}" for k in _RUN_KEYS
    }
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        params = ModelParams(**{k: float(flat[k]) for k in PARAM_NAMES if k in flat})
        grid = SpatialGrid(**{k: flat[k] for k in GRID_NAMES if k in flat})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    kind = flat.get("scan.kind", "single-run")
    if kind not in SCAN_KINDS:
        raise ConfigError(f"scan.kind must be one of {SCAN_KINDS}, got {kind!r}")
    raw_scan = {k[5:]: v for k, v in flat.items() if k.startswith("scan.") and k != "scan.kind"}
    scan = _scan_range(kind, raw_scan, params) if kind in RANGED_KINDS else None
    raw_run = {k[4:]: v for k, v in flat.items() if k.startswith("run.")}
    t_final = raw_run.get("t_final")
    if isinstance(t_final, str) and t_final.lower() == "auto":
        t_final = None
    run = RunSettings(
        t_final=None if t_final is None else float(t_final),
        dt=float(raw_run.get("dt", RunSettings.dt)),
        sample_stride=int(raw_run.get("sample_stride", RunSettings.sample_stride)),
        initial=str(raw_run.get("initial", RunSettings.initial)),
        four_state=bool(raw_run.get("four_state", False)),
        spectrum=bool(raw_run.get("spectrum", kind == "spectrum")),
        wavefunctions=bool(raw_run.get("wavefunctions", False)),
    )
    if run.t_final is not None and not math.isfinite(run.t_final):
        raise ConfigError("run.t_final must be finite")
    return _checked(RunConfig(kind=kind, params=params, grid=grid, scan=scan, run=run,
                              scan_options=tuple(sorted(raw_scan.items()))))


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def load(path=None, overrides=()) -> RunConfig:
    tree = {}
    if path is not None:
        path = Path(path)
        try:
            tree = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(tree, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    flat = _canonical(flatten(tree))
    for text in overrides:
        key, value = parse_override(text)
        flat.update(_canonical({key: value}))
    return from_mapping(flat)
