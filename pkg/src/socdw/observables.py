"""Observables of a spinor state and post-processing of trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import io
from .model import SpatialGrid, SpinorField, inner
from .stationary import EigenSolution, apply_pauli

TRAJECTORY_HEADER = (
    "t", "p_left", "p_right", "sx", "sy", "sz", "p11", "p12", "p21", "p22", "p_all",
)
_COLUMNS = TRAJECTORY_HEADER[1:]


def well_weights(grid: SpatialGrid, side: str) -> np.ndarray:
    """Quadrature weights for one well; x = 0 (and the self-mirror boundary
    point of a symmetric periodic grid) count half to each side."""
    x = grid.x
    tol = 1e-9 * grid.dx
    if side == "left":
        w = (x < -tol).astype(float)
    elif side == "right":
        w = (x > tol).astype(float)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    w[np.abs(x) <= tol] = 0.5
    if grid.is_symmetric:
        w[0] = 0.5
    return w


def well_probability(field: SpinorField, grid: SpatialGrid, side: str = "left") -> float:
    return float(np.sum(well_weights(grid, side) * field.density()) * grid.dx)


def spin_polarization(field: SpinorField, grid: SpatialGrid, axis: str) -> float:
    """S_n = <sigma_n>/2."""
    value = inner(field, apply_pauli(field, axis), grid)
    if abs(value.imag) > 1e-10:
        raise ArithmeticError(f"<sigma_{axis}> has imaginary part {value.imag:.3g}")
    return 0.5 * value.real


def eigenstate_projection(field: SpinorField, solution: EigenSolution) -> tuple[np.ndarray, float]:
    """Populations P_ij = |<ij|psi>|^2 in the order 11, 12, 21, 22, and their sum."""
    p = np.array([abs(inner(s, field, solution.grid)) ** 2 for s in solution.states])
    return p, float(p.sum())


def time_average(series, times) -> float:
    """Trapezoidal mean over the full recorded window."""
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if series.shape != times.shape or series.size < 2:
        raise ValueError("need at least two samples with matching times")
    span = times[-1] - times[0]
    if span <= 0:
        raise ValueError("times must increase")
    return float(trapezoid(series, times) / span)


class TrajectoryProbe:
    """Evaluates every recorded observable on a raw (2, n) state array."""

    def __init__(self, grid: SpatialGrid, solution: EigenSolution | None = None):
        self.grid = grid
        self.left = well_weights(grid, "left") * grid.dx
        self.right = well_weights(grid, "right") * grid.dx
        if solution is not None:
            if solution.grid.n != grid.n or solution.grid.dx != grid.dx:
                raise ValueError("eigen-solution lives on a different grid")
            self.bras = np.stack([s.stacked().ravel().conj() for s in solution.states])
        else:
            self.bras = None

    def __call__(self, data: np.ndarray) -> np.ndarray:
        up, down = data[0], data[1]
        dens_up = up.real**2 + up.imag**2
        dens_down = down.real**2 + down.imag**2
        dens = dens_up + dens_down
        cross = np.vdot(up, down) * self.grid.dx
        if self.bras is not None:
            p = np.abs(self.bras @ data.ravel() * self.grid.dx) ** 2
        else:
            p = np.full(4, np.nan)
        return np.array([
            self.left @ dens,
            self.right @ dens,
            cross.real,
            cross.imag,
            0.5 * np.sum(dens_up - dens_down) * self.grid.dx,
            *p,
            p.sum(),
            np.sum(dens) * self.grid.dx,
        ])


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Sampled observables of one run. ``norm`` is kept for diagnostics only."""

    times: np.ndarray
    p_left: np.ndarray
    p_right: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    p11: np.ndarray
    p12: np.ndarray
    p21: np.ndarray
    p22: np.ndarray
    p_all: np.ndarray
    norm: np.ndarray
    final_state: SpinorField | None = field(default=None, repr=False)

    @classmethod
    def from_samples(cls, times, samples, final_state=None) -> TrajectoryRecord:
        samples = np.asarray(samples, dtype=float)
        cols = {name: samples[:, i] for i, name in enumerate(_COLUMNS)}
        return cls(np.asarray(times, dtype=float), **cols, norm=samples[:, len(_COLUMNS)],
                   final_state=final_state)

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def populations(self) -> np.ndarray:
        return np.stack([self.p11, self.p12, self.p21, self.p22], axis=1)

    def averages(self) -> dict:
        return {name: time_average(getattr(self, name), self.times) for name in _COLUMNS}

    def window(self, t_max: float) -> TrajectoryRecord:
        keep = self.times <= t_max + 1e-9
        kw = {name: getattr(self, name)[keep] for name in ("times", *_COLUMNS, "norm")}
        return TrajectoryRecord(**kw)

    def rows(self):
        cols = [self.times] + [getattr(self, name) for name in _COLUMNS]
        return zip(*cols)

    def to_csv(self, path) -> Path:
        return io.write_csv(path, TRAJECTORY_HEADER, self.rows())


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """One-sided amplitude spectrum against angular frequency."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    peaks: np.ndarray  # (k, 2): refined angular frequency, height
    n_samples: int

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def total_power(self) -> float:
        """Signal variance recovered from the amplitudes (Parseval)."""
        amp = self.amplitudes
        nyquist = self.n_samples % 2 == 0
        inner_amp = amp[1:-1] if nyquist else amp[1:]
        power = amp[0] ** 2 + 0.5 * np.sum(inner_amp**2)
        if nyquist:
            power += amp[-1] ** 2
        return float(power)

    def match(self, analytic: dict, tolerance: float | None = None) -> dict:
        """Nearest detected peak for each labelled analytic frequency.

        Returns label -> (peak_frequency, distance); negative analytic
        frequencies are folded onto |f|.
        """
        tolerance = self.resolution if tolerance is None else tolerance
        out = {}
        for label, freq in analytic.items():
            target = abs(freq)
            if len(self.peaks) == 0:
                out[label] = (np.nan, np.inf)
                continue
            j = int(np.argmin(np.abs(self.peaks[:, 0] - target)))
            out[label] = (float(self.peaks[j, 0]), float(abs(self.peaks[j, 0] - target)))
        return out

    def to_csv(self, path) -> Path:
        return io.write_csv(path, ("omega", "amplitude"), zip(self.frequencies, self.amplitudes))

    def peaks_to_csv(self, path, analytic: dict | None = None) -> Path:
        analytic = analytic or {}
        rows = []
        for freq, height in self.peaks:
            label = ""
            for name, target in analytic.items():
                if abs(freq - abs(target)) <= self.resolution:
                    label = name
                    break
            rows.append((freq, height, label))
        return io.write_csv(path, ("omega_peak", "amplitude", "analytic_label"), rows)


def _refine_peak(amp: np.ndarray, k: int) -> tuple[float, float]:
    a, b, c = amp[k - 1], amp[k], amp[k + 1]
    denom = a - 2 * b + c
    if denom == 0:
        return 0.0, b
    delta = 0.5 * (a - c) / denom
    return delta, b - 0.25 * (a - c) * delta


def beat_spectrum(series, times, beat_frequency: float | None = None,
                  min_beats: float = 5.0, threshold: float = 0.1) -> SpectrumResult:
    """Fourier amplitude spectrum of a mean-subtracted, uniformly sampled series.

    If ``beat_frequency`` is given the window must span ``min_beats`` beat
    periods ``2*pi/beat_frequency``. Peaks are local maxima above
    ``threshold`` times the global maximum, refined by a parabola through
    the three neighbouring bins.
    """
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if series.size < 8 or series.shape != times.shape:
        raise ValueError("need at least 8 uniformly spaced samples")
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
        raise ValueError("beat_spectrum requires uniform sampling")
    window = series.size * dt
    if beat_frequency is not None:
        needed = min_beats * 2 * np.pi / abs(beat_frequency)
        if window < needed * (1 - 1e-9):
            raise ValueError(
                f"window {window:.6g} is too short: resolving beat frequency "
                f"{abs(beat_frequency):.6g} needs t_final >= {needed:.6g}"
            )
    n = series.size
    spec = np.abs(np.fft.rfft(series - series.mean())) / n
    spec[1:] *= 2
    if n % 2 == 0:
        spec[-1] /= 2
    freqs = 2 * np.pi * np.fft.rfftfreq(n, d=dt)
    df = freqs[1] - freqs[0]
    peaks = []
    top = spec.max()
    if top > 0:
        interior = np.arange(1, spec.size - 1)
        is_max = (spec[interior] > spec[interior - 1]) & (spec[interior] >= spec[interior + 1])
        for k in interior[is_max]:
            if spec[k] >= threshold * top:
                delta, height = _refine_peak(spec, k)
                peaks.append((freqs[k] + delta * df, height))
    return SpectrumResult(freqs, spec, np.array(peaks, dtype=float).reshape(-1, 2), n)
