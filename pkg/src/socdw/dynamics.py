"""Split-step Fourier propagation of the driven spinor Schroedinger equation

    i d/dt Psi = [H0 + omega1*cos(omega*t)*sigma_x] Psi.

Each Strang step is  half position step -> full momentum step -> half
position step.  The position factor exp(-i dt/2 [V + Omega(t_mid) sigma_x])
is exact because V is proportional to the spin identity; the momentum factor
exp(-i dt [k^2/2 - gamma*k*sigma_z]) is diagonal per spin component.
Omega is evaluated at the step midpoint in both half steps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .model import ModelParams, SpatialGrid, SpinorField, sample_potential
from .observables import TrajectoryProbe, TrajectoryRecord

logger = logging.getLogger(__name__)

MIN_STEPS_PER_PERIOD = 100


@dataclass(frozen=True)
class DriveProtocol:
    omega0: float
    omega1: float
    omega: float

    @classmethod
    def from_params(cls, params: ModelParams) -> DriveProtocol:
        return cls(params.omega0, params.omega1, params.omega)

    def __call__(self, t):
        return self.omega0 + self.omega1 * np.cos(self.omega * np.asarray(t, dtype=float))

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega if self.omega > 0 else math.inf


@dataclass(frozen=True)
class PropagationPlan:
    t_final: float
    dt: float = 1e-3
    sample_stride: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least one time step")
        if int(self.sample_stride) < 1:
            raise ValueError("sample_stride must be >= 1")
        object.__setattr__(self, "sample_stride", int(self.sample_stride))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def check(self, params: ModelParams):
        if params.driven:
            period = 2 * math.pi / params.omega
            if self.dt > period / MIN_STEPS_PER_PERIOD:
                raise ValueError(
                    f"dt={self.dt:g} gives fewer than {MIN_STEPS_PER_PERIOD} "
                    f"steps per drive period {period:.4g}"
                )


class SplitStepPropagator:
    """Precomputed split-step factors for one grid and parameter set.

    Owns its caches; give each worker its own instance.
    """

    def __init__(self, grid: SpatialGrid, params: ModelParams):
        self.grid = grid
        self.params = params
        self.drive = DriveProtocol.from_params(params)
        self.v = sample_potential(grid, params)
        kin = 0.5 * grid.k**2
        soc = params.gamma * grid.k_odd
        self._k_energy = np.stack([kin - soc, kin + soc])
        self._cache = {}

    def _factors(self, dt: float):
        out = self._cache.get(dt)
        if out is None:
            out = (
                np.exp(-1j * dt * self._k_energy),
                np.exp(-0.5j * dt * self.v),
                np.exp(-1j * dt * self.v),
            )
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[dt] = out
        return out

    @staticmethod
    def _position(data, vphase, c, s):
        up, down = data[0], data[1]
        saved = up.copy()
        up *= c
        up += (-1j * s) * down
        down *= c
        down += (-1j * s) * saved
        data *= vphase

    def _momentum(self, data, kphase):
        spec = scipy.fft.fft(data, axis=1, overwrite_x=True)
        spec *= kphase
        return scipy.fft.ifft(spec, axis=1, overwrite_x=True)

    def step(self, data: np.ndarray, t: float, dt: float) -> np.ndarray:
        """One plain Strang step on a (2, n) array (returns a new array)."""
        return self.advance(data, t, dt, 1)

    def advance(self, data: np.ndarray, t: float, dt: float, n_steps: int) -> np.ndarray:
        """``n_steps`` Strang steps; adjacent position half steps are merged,
        which is exact since their spin rotations commute."""
        data = np.array(data, dtype=complex, copy=True)
        if n_steps <= 0:
            return data
        kphase, half_v, full_v = self._factors(dt)
        theta = self.drive(t + (np.arange(n_steps) + 0.5) * dt) * (0.5 * dt)
        merged = theta[:-1] + theta[1:]
        cos_m, sin_m = np.cos(merged), np.sin(merged)
        self._position(data, half_v, math.cos(theta[0]), math.sin(theta[0]))
        for j in range(n_steps - 1):
            data = self._momentum(data, kphase)
            self._position(data, full_v, cos_m[j], sin_m[j])
        data = self._momentum(data, kphase)
        self._position(data, half_v, math.cos(theta[-1]), math.sin(theta[-1]))
        return data


def step(field: SpinorField, t: float, dt: float, params: ModelParams,
         grid: SpatialGrid) -> SpinorField:
    prop = SplitStepPropagator(grid, params)
    return SpinorField.from_stacked(prop.step(field.stacked(), t, dt))


def evolve(initial: SpinorField, plan: PropagationPlan, params: ModelParams,
           grid: SpatialGrid, probes: TrajectoryProbe | None = None,
           t0: float = 0.0, propagator: SplitStepPropagator | None = None) -> TrajectoryRecord:
    """Propagate ``initial`` and sample ``probes`` every ``sample_stride`` steps."""
    plan.check(params)
    probes = probes or TrajectoryProbe(grid)
    prop = propagator or SplitStepPropagator(grid, params)
    data = initial.stacked()
    n_total = plan.n_steps
    times = [t0]
    samples = [probes(data)]
    done = 0
    while done < n_total:
        m = min(plan.sample_stride, n_total - done)
        data = prop.advance(data, t0 + done * plan.dt, plan.dt, m)
        done += m
        t = t0 + done * plan.dt
        row = probes(data)
        if not np.all(np.isfinite(row[:5])) or not np.isfinite(row[-1]):
            raise FloatingPointError(f"non-finite wavefunction at t = {t:.6g}")
        times.append(t)
        samples.append(row)
    logger.debug("evolved %d steps, final norm %.15f", n_total, samples[-1][-1])
    return TrajectoryRecord.from_samples(times, samples, SpinorField.from_stacked(data))
