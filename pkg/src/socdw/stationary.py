"""Stationary problem: the four lowest eigenstates of the static Hamiltonian

    H0 = p^2/2 - gamma*sigma_z*p + omega0*sigma_x + V(x),

their symmetry labels and the left/right localized combinations.

Derivatives are spectral. ``lowest_four`` diagonalizes the full 2n x 2n
matrix; ``solve_stationary`` exploits the sigma_x*P symmetry of H0 and
diagonalizes the two n x n symmetry sectors instead, which is faster and
yields states with sharp sigma_x*P labels even at exact degeneracies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import io
from .model import (
    ModelParams,
    SpatialGrid,
    SpinorField,
    inner,
    normalize,
    sample_potential,
)

logger = logging.getLogger(__name__)

LABELS = ("11", "12", "21", "22")
SYMMETRY_KEYS = ("pt", "sxp", "sxt", "sx", "sy", "sz")
RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-9
FROZEN_TOL = 1e-6


class EigensolverError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class GaugeError(ValueError):
    pass


# --- symmetry operators on (2, n) arrays -------------------------------------

def _mirror(data: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return data[:, grid.mirror_index]


def apply_pt(field: SpinorField, grid: SpatialGrid) -> SpinorField:
    return SpinorField.from_stacked(np.conj(_mirror(field.stacked(), grid)))


def apply_sxp(field: SpinorField, grid: SpatialGrid) -> SpinorField:
    return SpinorField.from_stacked(_mirror(field.stacked(), grid)[::-1])


def apply_sxt(field: SpinorField, grid: SpatialGrid) -> SpinorField:
    return SpinorField(np.conj(field.psi_down), np.conj(field.psi_up))


def apply_pauli(field: SpinorField, axis: str) -> SpinorField:
    up, down = field.psi_up, field.psi_down
    if axis == "x":
        return SpinorField(down, up)
    if axis == "y":
        return SpinorField(-1j * down, 1j * up)
    if axis == "z":
        return SpinorField(up, -down)
    raise ValueError(f"unknown Pauli axis {axis!r}")


# --- Hamiltonian ---------------------------------------------------------------

def _spectral_matrix(multiplier: np.ndarray) -> np.ndarray:
    """Dense matrix of psi -> ifft(multiplier * fft(psi)) (a circulant)."""
    return scipy.linalg.circulant(np.fft.ifft(multiplier))


def apply_h0(field: SpinorField, grid: SpatialGrid, params: ModelParams) -> SpinorField:
    """Matrix-free application of H0 through FFTs."""
    data = field.stacked()
    spec = np.fft.fft(data, axis=1)
    kinetic = np.fft.ifft(spec * (0.5 * grid.k**2), axis=1)
    momentum = np.fft.ifft(spec * grid.k_odd, axis=1)
    v = sample_potential(grid, params)
    out = kinetic + v * data
    out[0] += -params.gamma * momentum[0] + params.omega0 * data[1]
    out[1] += params.gamma * momentum[1] + params.omega0 * data[0]
    return SpinorField.from_stacked(out)


def build_h0(grid: SpatialGrid, params: ModelParams) -> np.ndarray:
    """Dense Hermitian 2n x 2n matrix acting on stacked (psi_up, psi_down)."""
    n = grid.n
    kin = _spectral_matrix(0.5 * grid.k**2)
    mom = _spectral_matrix(grid.k_odd)
    diag = np.diag(sample_potential(grid, params))
    h = np.empty((2 * n, 2 * n), dtype=complex)
    h[:n, :n] = kin - params.gamma * mom + diag
    h[n:, n:] = kin + params.gamma * mom + diag
    h[:n, n:] = params.omega0 * np.eye(n)
    h[n:, :n] = params.omega0 * np.eye(n)
    # symmetrize away the ifft round-off
    return 0.5 * (h + h.conj().T)


def _sector_hamiltonian(grid: SpatialGrid, params: ModelParams, parity: int) -> np.ndarray:
    # with psi_down = parity * psi_up(-x) the spin-up component obeys this n x n problem
    kin = _spectral_matrix(0.5 * grid.k**2)
    mom = _spectral_matrix(grid.k_odd)
    h = kin - params.gamma * mom + np.diag(sample_potential(grid, params))
    h[np.arange(grid.n), grid.mirror_index] += parity * params.omega0
    return 0.5 * (h + h.conj().T)


# --- gauge and symmetries ---------------------------------------------------------

def fix_gauge(state: SpinorField, grid: SpatialGrid) -> SpinorField:
    """Rotate the global phase so that sigma_x*T|psi> = +|psi>.

    The remaining sign freedom is fixed by making the largest spin-up sample
    have a positive real part (or imaginary part, if that dominates).
    """
    state = normalize(state, grid)
    overlap = inner(state, apply_sxt(state, grid), grid)
    if abs(abs(overlap) - 1.0) > 1e-3:
        raise GaugeError(
            f"state is not a sigma_x*T eigenstate: |<psi|sxT|psi>| = {abs(overlap):.6f}"
        )
    state = state * np.exp(0.5j * np.angle(overlap))
    ref = state.psi_up[np.argmax(np.abs(state.psi_up))]
    sign = np.sign(ref.real) if abs(ref.real) >= abs(ref.imag) else np.sign(ref.imag)
    return state * (-1.0 if sign < 0 else 1.0)


def symmetry_expectations(state: SpinorField, grid: SpatialGrid) -> dict:
    """Expectations <PT>, <sxP>, <sxT>, <sx>, <sy>, <sz> (real parts)."""
    values = {
        "pt": inner(state, apply_pt(state, grid), grid),
        "sxp": inner(state, apply_sxp(state, grid), grid),
        "sxt": inner(state, apply_sxt(state, grid), grid),
        "sx": inner(state, apply_pauli(state, "x"), grid),
        "sy": inner(state, apply_pauli(state, "y"), grid),
        "sz": inner(state, apply_pauli(state, "z"), grid),
    }
    return {key: float(values[key].real) for key in SYMMETRY_KEYS}


def position_expectation(state: SpinorField, grid: SpatialGrid) -> float:
    return float(np.sum(grid.x * state.density()) * grid.dx)


# --- eigen-solutions -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Four lowest eigenpairs, ordered E11 <= E12 < E21 <= E22."""

    grid: SpatialGrid
    params: ModelParams
    energies: np.ndarray
    states: tuple
    symmetry_table: tuple
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(4))

    @property
    def e0(self) -> float:
        return float(np.mean(self.energies))

    @property
    def labels(self) -> tuple:
        return LABELS

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        return LABELS.index(str(label))

    def energy(self, label) -> float:
        return float(self.energies[self.index(label)])

    def state(self, label) -> SpinorField:
        return self.states[self.index(label)]

    def sxp_labels(self) -> np.ndarray:
        return np.array([int(round(row["sxp"])) for row in self.symmetry_table])

    def sigma_x_matrix(self) -> np.ndarray:
        """Complex 4x4 matrix <m|sigma_x|n> in the order 11, 12, 21, 22."""
        flipped = [apply_pauli(s, "x") for s in self.states]
        return np.array(
            [[inner(a, b, self.grid) for b in flipped] for a in self.states]
        )

    def gram(self) -> np.ndarray:
        return np.array(
            [[inner(a, b, self.grid) for b in self.states] for a in self.states]
        )

    def lower_splitting(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def upper_splitting(self) -> float:
        return float(self.energies[3] - self.energies[2])

    def signed_splittings(self) -> tuple[float, float]:
        """E(sxP=+1) - E(sxP=-1) within the lower and within the upper pair.

        Unlike the energy-ordered gaps these change sign at level crossings.
        """
        labels = self.sxp_labels()
        out = []
        for pair in ((0, 1), (2, 3)):
            a, b = pair
            if labels[a] == labels[b]:
                out.append(math.nan)
            else:
                plus, minus = (a, b) if labels[a] > 0 else (b, a)
                out.append(float(self.energies[plus] - self.energies[minus]))
        return out[0], out[1]


def _residual(h_apply, vec: np.ndarray, energy: float) -> float:
    return float(np.linalg.norm(h_apply(vec) - energy * vec))


def _finish(grid, params, energies, raw_states, residuals) -> EigenSolution:
    """Gauge-fix, orient the doublets so |i-> is left-localized, tabulate symmetries."""
    bad = residuals > RESIDUAL_TOL
    if np.any(bad):
        raise EigensolverError(
            f"eigen-residuals above {RESIDUAL_TOL:g}: {residuals}", residuals=residuals
        )
    states = [fix_gauge(s, grid) for s in raw_states]
    for i in (0, 2):
        left = (states[i + 1] - states[i]) * (1 / np.sqrt(2))
        if position_expectation(left, grid) > 0:
            states[i] = -states[i]
    table = tuple(symmetry_expectations(s, grid) for s in states)
    return EigenSolution(
        grid=grid,
        params=params,
        energies=np.asarray(energies, dtype=float),
        states=tuple(states),
        symmetry_table=table,
        residuals=np.asarray(residuals, dtype=float),
    )


def _rotate_degenerate(vecs: np.ndarray, energies: np.ndarray, grid: SpatialGrid):
    """Inside exactly degenerate doublets, rotate onto sigma_x*P eigenvectors."""
    n = grid.n
    for a, b in ((0, 1), (2, 3)):
        if abs(energies[b] - energies[a]) >= DEGENERACY_TOL:
            continue
        pair = vecs[:, [a, b]]
        mirrored = np.concatenate(
            [pair[n:][grid.mirror_index], pair[:n][grid.mirror_index]]
        )
        s = pair.conj().T @ mirrored
        _, rot = np.linalg.eigh(0.5 * (s + s.conj().T))
        vecs[:, [a, b]] = pair @ rot
    return vecs


def lowest_four(h0: np.ndarray, grid: SpatialGrid, params: ModelParams) -> EigenSolution:
    """Dense diagonalization of the full 2n x 2n matrix from ``build_h0``."""
    n = grid.n
    if h0.shape != (2 * n, 2 * n):
        raise ValueError("operator shape does not match the grid")
    energies, vecs = scipy.linalg.eigh(h0, subset_by_index=[0, 3])
    vecs = _rotate_degenerate(vecs, energies, grid)
    residuals = np.array(
        [_residual(lambda v: h0 @ v, vecs[:, i], energies[i]) for i in range(4)]
    )
    raw = [SpinorField(vecs[:n, i], vecs[n:, i]) for i in range(4)]
    return _finish(grid, params, energies, raw, residuals)


def solve_stationary(params: ModelParams, grid: SpatialGrid | None = None) -> EigenSolution:
    """Four lowest eigenpairs via the two sigma_x*P sectors."""
    grid = grid or SpatialGrid()
    candidates = []
    for parity in (1, -1):
        h = _sector_hamiltonian(grid, params, parity)
        vals, vecs = scipy.linalg.eigh(h, subset_by_index=[0, 3])
        for i in range(len(vals)):
            res = _residual(lambda v: h @ v, vecs[:, i], vals[i])
            candidates.append((vals[i], parity, vecs[:, i], res))
    candidates.sort(key=lambda c: (c[0], -c[1]))
    chosen = candidates[:4]
    raw = []
    for _, parity, f, _ in chosen:
        down = parity * f[grid.mirror_index]
        raw.append(SpinorField(f / np.sqrt(2), down / np.sqrt(2)))
    # sector residuals are for unit vectors of the sector problem; the
    # stacked spinor (f, +-Rf)/sqrt(2) has the same residual norm
    residuals = np.array([c[3] for c in chosen])
    energies = np.array([c[0] for c in chosen])
    if not energies[1] < energies[2]:
        raise EigensolverError("lower and upper doublets are not separated", residuals)
    return _finish(grid, params, energies, raw, residuals)


# --- localized basis -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalizedBasis:
    """|i+-> = (|i2> +- |i1>)/sqrt(2); '-' states sit in the left well."""

    states: dict
    spin_x: dict
    positions: dict
    warnings: tuple = ()

    @property
    def sx1(self) -> float:
        return self.spin_x["1-"]

    @property
    def sx2(self) -> float:
        return self.spin_x["2-"]

    def __getitem__(self, key) -> SpinorField:
        return self.states[key]


def localized_basis(solution: EigenSolution) -> LocalizedBasis:
    grid = solution.grid
    states, spins, positions, notes = {}, {}, {}, []
    threshold = 0.1 * solution.params.well_separation / 2
    for i in (1, 2):
        lo = solution.state(f"{i}1")
        hi = solution.state(f"{i}2")
        for sign, name in ((-1, f"{i}-"), (1, f"{i}+")):
            s = (hi + lo * sign) * (1 / np.sqrt(2))
            states[name] = s
            spins[name] = 0.5 * inner(s, apply_pauli(s, "x"), grid).real
            positions[name] = position_expectation(s, grid)
            if abs(positions[name]) < threshold:
                msg = f"|{name}> is delocalized: <x> = {positions[name]:.3g}"
                logger.warning(msg)
                notes.append(msg)
    return LocalizedBasis(states, spins, positions, tuple(notes))


def tunneling_period(solution: EigenSolution) -> float:
    """2*pi/(E12 - E11); ``math.inf`` marks frozen (degenerate) dynamics."""
    gap = solution.lower_splitting()
    if abs(gap) < FROZEN_TOL:
        return math.inf
    return 2 * math.pi / gap


# --- export ------------------------------------------------------------------------

EIGEN_HEADER = ("label", "energy", "pt", "sxp", "sxt", "sx", "sy", "sz")
WAVEFUNCTION_HEADER = ("x", "re_up", "im_up", "re_down", "im_down")


def write_eigen_csv(solution: EigenSolution, path) -> Path:
    rows = [
        (label, solution.energies[i], *(solution.symmetry_table[i][k] for k in SYMMETRY_KEYS))
        for i, label in enumerate(LABELS)
    ]
    return io.write_csv(path, EIGEN_HEADER, rows)


def write_wavefunction_csv(state: SpinorField, grid: SpatialGrid, path) -> Path:
    rows = zip(
        grid.x,
        state.psi_up.real,
        state.psi_up.imag,
        state.psi_down.real,
        state.psi_down.imag,
    )
    return io.write_csv(path, WAVEFUNCTION_HEADER, rows)
