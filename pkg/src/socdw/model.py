"""Parameters, spatial grid, double-well potential and the spinor field type.

Units are dimensionless with hbar = M = 1; energies in units of hbar*omega_0.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

PARAM_NAMES = (
    "gamma",
    "omega0",
    "omega1",
    "omega",
    "well_depth",
    "well_width",
    "well_separation",
)
GRID_NAMES = ("x_min", "x_max", "n")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the static Hamiltonian and the Raman drive.

    The Raman coupling is ``omega0 + omega1 * cos(omega * t)``.
    """

    gamma: float = 0.725
    omega0: float = 1.0
    omega1: float = 0.1
    omega: float = 1.8445
    well_depth: float = 12.0
    well_width: float = 0.5
    well_separation: float = 2.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.well_depth <= 0:
            raise ValueError("well_depth must be positive")
        if self.well_width <= 0:
            raise ValueError("well_width must be positive")
        if self.well_separation <= 0:
            raise ValueError("well_separation must be positive")
        if self.omega1 < 0:
            raise ValueError("omega1 must be non-negative")
        if self.omega1 > 0 and self.omega <= 0:
            raise ValueError("omega must be positive when the drive is active")

    @property
    def driven(self) -> bool:
        return self.omega1 > 0

    def replace(self, **changes) -> ModelParams:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid ``x[j] = x_min + j*dx`` with ``n`` a power of two."""

    x_min: float = -10.0
    x_max: float = 10.0
    n: int = 1024

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 4 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order; the Nyquist entry is +pi/dx."""
        k = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        k[self.n // 2] = np.pi / self.dx
        k.flags.writeable = False
        return k

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives: Nyquist mode zeroed so that
        the discrete momentum stays exactly odd under reflection."""
        k = np.array(self.k)
        k[self.n // 2] = 0.0
        k.flags.writeable = False
        return k

    @property
    def is_symmetric(self) -> bool:
        return abs(self.x_min + self.x_max) <= 1e-12 * self.length

    @cached_property
    def mirror_index(self) -> np.ndarray:
        """Index map j -> index of -x[j]; valid only on a symmetric grid."""
        if not self.is_symmetric:
            raise ValueError("reflection x -> -x requires x_min == -x_max")
        return (-np.arange(self.n)) % self.n

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Two-component wavefunction (psi_up, psi_down) sampled on a grid."""

    psi_up: np.ndarray
    psi_down: np.ndarray

    def __post_init__(self):
        up = np.array(self.psi_up, dtype=complex)
        down = np.array(self.psi_down, dtype=complex)
        if up.ndim != 1 or up.shape != down.shape:
            raise ValueError("spinor components must be 1-D arrays of equal length")
        up.flags.writeable = False
        down.flags.writeable = False
        object.__setattr__(self, "psi_up", up)
        object.__setattr__(self, "psi_down", down)

    @classmethod
    def from_stacked(cls, data: np.ndarray) -> SpinorField:
        data = np.asarray(data)
        if data.ndim == 1:
            half = data.shape[0] // 2
            return cls(data[:half], data[half:])
        return cls(data[0], data[1])

    def stacked(self) -> np.ndarray:
        """Writable (2, n) copy."""
        return np.stack([self.psi_up, self.psi_down])

    @property
    def n(self) -> int:
        return self.psi_up.shape[0]

    def density(self) -> np.ndarray:
        return np.abs(self.psi_up) ** 2 + np.abs(self.psi_down) ** 2

    def __mul__(self, scalar) -> SpinorField:
        return SpinorField(self.psi_up * scalar, self.psi_down * scalar)

    __rmul__ = __mul__

    def __add__(self, other: SpinorField) -> SpinorField:
        return SpinorField(self.psi_up + other.psi_up, self.psi_down + other.psi_down)

    def __sub__(self, other: SpinorField) -> SpinorField:
        return SpinorField(self.psi_up - other.psi_up, self.psi_down - other.psi_down)

    def __neg__(self) -> SpinorField:
        return SpinorField(-self.psi_up, -self.psi_down)


def _check_compatible(field: SpinorField, grid: SpatialGrid):
    if field.n != grid.n:
        raise ValueError(f"field has {field.n} points but grid has {grid.n}")


def inner(a: SpinorField, b: SpinorField, grid: SpatialGrid) -> complex:
    """<a|b> with the dx*sum quadrature."""
    _check_compatible(a, grid)
    _check_compatible(b, grid)
    return complex(
        (np.vdot(a.psi_up, b.psi_up) + np.vdot(a.psi_down, b.psi_down)) * grid.dx
    )


def norm_squared(field: SpinorField, grid: SpatialGrid) -> float:
    _check_compatible(field, grid)
    return float(np.sum(field.density()) * grid.dx)


def normalize(field: SpinorField, grid: SpatialGrid) -> SpinorField:
    nrm2 = norm_squared(field, grid)
    if not nrm2 > 0 or not np.isfinite(nrm2):
        raise ValueError("cannot normalize a field with zero (or non-finite) norm")
    return field * (1.0 / np.sqrt(nrm2))


def potential(x, params: ModelParams):
    """Symmetric double well built from two sextic-Gaussian wells at +-d/2."""
    x = np.asarray(x, dtype=float)
    a6 = params.well_width**6
    half = params.well_separation / 2
    u = params.well_depth
    out = -u * np.exp(-((x + half) ** 6) / a6) - u * np.exp(-((x - half) ** 6) / a6)
    return out if out.ndim else float(out)


def sample_potential(grid: SpatialGrid, params: ModelParams) -> np.ndarray:
    return potential(grid.x, params)
