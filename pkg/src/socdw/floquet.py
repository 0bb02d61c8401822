"""Four-state reduction, Floquet quasienergies and two-level resonance analytics.

In the basis |11>, |12>, |21>, |22> the driven amplitudes obey

    i dc/dt = [diag(E_ij - E0) + omega1*cos(omega*t)*Gamma] c,   Gamma_mn = <m|sigma_x|n>.

A first-order resonance E_beta - E_alpha = omega between a lower state alpha
and an upper state beta is governed by the coupling V = omega1*Gamma_ab/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from . import io
from .stationary import LABELS, EigenSolution

NEAR_DEGENERATE = 1e-3
FORBIDDEN_COUPLING = 1e-6
OVERLAP_FACTOR = 5.0
SCENARIOS = ("degenerate-single", "nondegenerate-single", "nondegenerate-double")


# --- four-state model -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FourStateModel:
    h0_diag: np.ndarray
    gamma_matrix: np.ndarray
    omega1: float
    omega: float
    e0: float = 0.0
    sxp: np.ndarray | None = None

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def hamiltonian(self, t: float) -> np.ndarray:
        return np.diag(self.h0_diag) + self.omega1 * math.cos(self.omega * t) * self.gamma_matrix

    def with_drive(self, omega: float | None = None, omega1: float | None = None) -> FourStateModel:
        return replace(
            self,
            omega=self.omega if omega is None else float(omega),
            omega1=self.omega1 if omega1 is None else float(omega1),
        )

    def restrict(self, indices) -> FourStateModel:
        idx = np.asarray(indices)
        return replace(
            self,
            h0_diag=self.h0_diag[idx],
            gamma_matrix=self.gamma_matrix[np.ix_(idx, idx)],
            sxp=None if self.sxp is None else self.sxp[idx],
        )


def build_four_state(solution: EigenSolution, params=None) -> FourStateModel:
    params = params or solution.params
    gamma = solution.sigma_x_matrix()
    if np.max(np.abs(gamma.imag)) > 1e-8:
        raise ValueError("Gamma has imaginary parts; are the states gauge-fixed?")
    gamma = gamma.real
    if np.max(np.abs(gamma - gamma.T)) > 1e-8:
        raise ValueError("Gamma is not symmetric")
    gamma = 0.5 * (gamma + gamma.T)
    return FourStateModel(
        h0_diag=solution.energies - solution.e0,
        gamma_matrix=gamma,
        omega1=params.omega1,
        omega=params.omega,
        e0=solution.e0,
        sxp=solution.sxp_labels(),
    )


def _rk4(model: FourStateModel, y: np.ndarray, t: float, dt: float, n_steps: int) -> np.ndarray:
    """Classic RK4 for i dy/dt = H(t) y; y may be a vector or a matrix."""
    h0 = -1j * np.diag(model.h0_diag)
    g = -1j * model.omega1 * model.gamma_matrix
    w = model.omega
    half = 0.5 * dt
    for j in range(n_steps):
        tj = t + j * dt
        a0 = h0 + math.cos(w * tj) * g
        am = h0 + math.cos(w * (tj + half)) * g
        a1 = h0 + math.cos(w * (tj + dt)) * g
        k1 = a0 @ y
        k2 = am @ (y + half * k1)
        k3 = am @ (y + half * k2)
        k4 = a1 @ (y + dt * k3)
        y = y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def default_step(model: FourStateModel) -> float:
    return min(model.period / 400, 5e-3) if model.omega > 0 else 5e-3


@dataclass(frozen=True, eq=False)
class FourStateTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray  # (n_samples, 4)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> np.ndarray:
        return np.sum(self.populations(), axis=1)


def integrate_four_state(model: FourStateModel, c0, t_final: float,
                         sample_interval: float | None = None,
                         dt: float | None = None) -> FourStateTrajectory:
    """RK4 integration sampled every ``sample_interval`` (default: 200 samples).

    The step is shrunk so that samples fall exactly on step boundaries and
    never exceeds a 200th of the drive period.
    """
    c = np.asarray(c0, dtype=complex)
    if abs(np.vdot(c, c).real - 1) > 1e-8:
        raise ValueError("initial amplitudes must be normalized")
    dt_max = dt or default_step(model)
    if model.omega > 0:
        dt_max = min(dt_max, model.period / 200)
    sample_interval = sample_interval or t_final / 200
    per_sample = max(1, math.ceil(sample_interval / dt_max - 1e-9))
    h = sample_interval / per_sample
    n_samples = int(round(t_final / sample_interval))
    times = [0.0]
    out = [c]
    for s in range(n_samples):
        c = _rk4(model, c, s * sample_interval, h, per_sample)
        if not np.all(np.isfinite(c)):
            raise FloatingPointError(f"non-finite amplitudes at t = {(s + 1) * sample_interval:.6g}")
        times.append((s + 1) * sample_interval)
        out.append(c)
    return FourStateTrajectory(np.array(times), np.array(out))


# --- quasienergies ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FloquetStates:
    quasienergies: np.ndarray  # lambda in (-omega/2, omega/2]
    vectors: np.ndarray  # columns are Floquet states at t = 0
    omega: float

    @property
    def scaled(self) -> np.ndarray:
        """lambda / (omega/2) in (-1, 1]."""
        return self.quasienergies / (0.5 * self.omega)

    def dominant(self) -> np.ndarray:
        """Index of the unperturbed state carrying most weight in each Floquet state."""
        return np.argmax(np.abs(self.vectors) ** 2, axis=0)


def fold(lam, omega: float):
    """Map quasienergies into the first zone (-omega/2, omega/2]."""
    lam = np.asarray(lam, dtype=float)
    out = -((-lam + 0.5 * omega) % omega - 0.5 * omega)
    return out


def monodromy(model: FourStateModel, steps: int | None = None) -> np.ndarray:
    if model.omega <= 0:
        raise ValueError("quasienergies need omega > 0")
    steps = steps or max(2000, math.ceil(model.period / 5e-3))
    dim = len(model.h0_diag)
    return _rk4(model, np.eye(dim, dtype=complex), 0.0, model.period / steps, steps)


def quasienergies(model: FourStateModel, params=None, steps: int | None = None,
                  unitarity_tol: float = 1e-8) -> FloquetStates:
    """Eigenphases of the one-period evolution operator, folded to the first zone.

    ``params`` (a ModelParams) optionally overrides the drive of ``model``.
    """
    if params is not None:
        model = model.with_drive(omega=params.omega, omega1=params.omega1)
    u = monodromy(model, steps)
    err = np.max(np.abs(u.conj().T @ u - np.eye(len(u))))
    if err > unitarity_tol:
        raise ArithmeticError(f"monodromy not unitary: deviation {err:.3g}")
    mu, vecs = np.linalg.eig(u)
    lam = fold(-np.angle(mu) / model.period, model.omega)
    order = np.argsort(lam)
    return FloquetStates(lam[order], vecs[:, order], model.omega)


def _sector_indices(model: FourStateModel, parity: int) -> np.ndarray:
    if model.sxp is None:
        raise ValueError("model carries no symmetry labels")
    return np.flatnonzero(model.sxp == parity)


def lower_pair_quasienergy_splitting(model: FourStateModel) -> float:
    """Signed quasienergy difference between the lower-pair-dominated Floquet
    states of the sxP = +1 and sxP = -1 sectors; zero at a crossing.

    The drive conserves sxP, so each sector is propagated on its own and the
    result is well defined even exactly at the crossing.
    """
    lam = {}
    for parity in (1, -1):
        idx = _sector_indices(model, parity)
        states = quasienergies(model.restrict(idx))
        lower = [k for k, i in enumerate(idx) if i < 2]
        if len(lower) != 1:
            raise ValueError("each sector must hold exactly one lower-pair state")
        weights = np.abs(states.vectors[lower[0]]) ** 2
        lam[parity] = states.quasienergies[int(np.argmax(weights))]
    return float(fold(lam[1] - lam[-1], model.omega))


def hybrid_gap(model: FourStateModel, alpha: int, beta: int) -> float:
    """Quasienergy gap between the two Floquet states built from alpha and beta
    (same sxP sector), folded into [0, omega/2]."""
    if model.sxp is not None and model.sxp[alpha] != model.sxp[beta]:
        raise ValueError("alpha and beta belong to different symmetry sectors")
    if model.sxp is not None:
        idx = _sector_indices(model, model.sxp[alpha])
    else:
        idx = np.array([alpha, beta])
    states = quasienergies(model.restrict(idx))
    pos = [int(np.flatnonzero(idx == alpha)[0]), int(np.flatnonzero(idx == beta)[0])]
    weight = np.sum(np.abs(states.vectors[pos]) ** 2, axis=0)
    pick = np.argsort(weight)[-2:]
    diff = abs(float(fold(states.quasienergies[pick[1]] - states.quasienergies[pick[0]], model.omega)))
    return min(diff, model.omega - diff)


def avoided_crossing(model: FourStateModel, alpha: int, beta: int,
                     half_width: float) -> tuple[float, float]:
    """Minimum of ``hybrid_gap`` over omega near E_beta - E_alpha.

    Returns (omega_at_minimum, minimum_gap).
    """
    centre = model.h0_diag[beta] - model.h0_diag[alpha]
    res = minimize_scalar(
        lambda w: hybrid_gap(model.with_drive(omega=w), alpha, beta),
        bounds=(centre - half_width, centre + half_width),
        method="bounded",
        options={"xatol": half_width * 1e-4},
    )
    return float(res.x), float(res.fun)


@dataclass(frozen=True, eq=False)
class QuasienergySpectrum:
    sweep: np.ndarray
    values: np.ndarray  # (points, 4) scaled, column j follows branch j
    dominant: np.ndarray  # (points, 4) unperturbed index dominating each branch

    def to_csv(self, path, name: str = "sweep_value"):
        rows = []
        for s, vals in zip(self.sweep, self.values):
            order = np.argsort(vals, kind="stable")
            rows.append((s, *vals[order], *order))
        header = (name, "lambda1", "lambda2", "lambda3", "lambda4",
                  "branch_id1", "branch_id2", "branch_id3", "branch_id4")
        return io.write_csv(path, header, rows)


def track_branches(sweep, states: list[FloquetStates]) -> QuasienergySpectrum:
    """Order Floquet states along a sweep by maximal overlap with the previous point."""
    values, dominant = [], []
    prev = None
    for st in states:
        vecs, scaled = st.vectors, st.scaled
        if prev is None:
            order = np.arange(len(scaled))
        else:
            cost = -np.abs(prev.conj().T @ vecs)
            _, order = linear_sum_assignment(cost)
        vecs = vecs[:, order]
        values.append(scaled[order])
        dominant.append(np.argmax(np.abs(vecs) ** 2, axis=0))
        prev = vecs
    return QuasienergySpectrum(np.asarray(sweep, dtype=float), np.array(values), np.array(dominant))


# --- effective two-level description ---------------------------------------------

@dataclass(frozen=True)
class EffectiveTwoLevel:
    alpha: str
    beta: str
    coupling: float  # signed V = omega1 * <alpha|sigma_x|beta> / 2
    e_alpha: float
    e_beta: float
    delta_e: float  # E12 - E11
    delta_e_upper: float  # E22 - E21
    omega1: float
    same_symmetry: bool
    photon_order: int = 1

    @property
    def omega_res(self) -> float:
        return self.e_beta - self.e_alpha

    @property
    def abs_coupling(self) -> float:
        return abs(self.coupling)

    @property
    def allowed(self) -> bool:
        return self.abs_coupling >= FORBIDDEN_COUPLING


def _check_pair(alpha, beta):
    if str(alpha) not in ("11", "12") or str(beta) not in ("21", "22"):
        raise ValueError("alpha must be in the lower pair (11, 12), beta in the upper (21, 22)")


def effective_coupling(solution: EigenSolution, alpha, beta, omega1: float,
                       gamma_matrix: np.ndarray | None = None) -> EffectiveTwoLevel:
    alpha, beta = str(alpha), str(beta)
    _check_pair(alpha, beta)
    if gamma_matrix is None:
        gamma_matrix = solution.sigma_x_matrix().real
    a, b = solution.index(alpha), solution.index(beta)
    sxp = solution.sxp_labels()
    return EffectiveTwoLevel(
        alpha=alpha,
        beta=beta,
        coupling=0.5 * omega1 * float(gamma_matrix[a, b]),
        e_alpha=solution.energy(alpha),
        e_beta=solution.energy(beta),
        delta_e=solution.lower_splitting(),
        delta_e_upper=solution.upper_splitting(),
        omega1=float(omega1),
        same_symmetry=bool(sxp[a] == sxp[b]),
    )


def rabi_solution(two_level: EffectiveTwoLevel, t, omega: float | None = None):
    """Floquet amplitudes (c_{0,alpha}, c_{1,beta}) at exact resonance, starting in alpha."""
    t = np.asarray(t, dtype=float)
    omega = two_level.omega_res if omega is None else omega
    v = two_level.abs_coupling
    eps_a = two_level.e_alpha
    eps_b = two_level.e_beta - omega
    return np.cos(v * t) * np.exp(-1j * eps_a * t), 1j * np.sin(v * t) * np.exp(-1j * eps_b * t)


def analytic_p_left(scenario: str, two_level: EffectiveTwoLevel, t):
    """Left-well probability predicted by the resonant two-level picture."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    t = np.asarray(t, dtype=float)
    v = two_level.abs_coupling
    de = two_level.delta_e
    degenerate = abs(de) < NEAR_DEGENERATE
    if scenario == "degenerate-single":
        if not degenerate:
            raise ValueError(f"degenerate scenario needs |E12 - E11| < {NEAR_DEGENERATE}, got {de:.3g}")
        return 0.5 + 0.5 * np.cos(v * t)
    if degenerate:
        raise ValueError(f"{scenario} scenario needs a non-degenerate lower pair")
    if scenario == "nondegenerate-single":
        return 0.5 + 0.25 * (np.cos((v + de) * t) + np.cos((v - de) * t))
    return 0.5 + 0.25 * (np.cos((2 * v + de) * t) + np.cos((2 * v - de) * t))


def analytic_frequencies(scenario: str, two_level: EffectiveTwoLevel) -> dict:
    """Labelled oscillation frequencies of ``analytic_p_left`` (may be negative)."""
    v, de = two_level.abs_coupling, two_level.delta_e
    if scenario == "degenerate-single":
        return {"f0": v}
    if scenario == "nondegenerate-single":
        return {"f1": v + de, "f2": v - de}
    if scenario == "nondegenerate-double":
        return {"f3": 2 * v + de, "f4": 2 * v - de}
    raise ValueError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True)
class ResonanceCatalog:
    entries: tuple
    scenario: str

    def allowed(self) -> list:
        return [e for e in self.entries if e.allowed]

    def get(self, alpha, beta) -> EffectiveTwoLevel:
        for e in self.entries:
            if e.alpha == str(alpha) and e.beta == str(beta):
                return e
        raise KeyError((alpha, beta))

    def nearest(self, omega: float, allowed_only: bool = True) -> EffectiveTwoLevel:
        pool = self.allowed() if allowed_only else list(self.entries)
        if not pool:
            pool = list(self.entries)
        return min(pool, key=lambda e: abs(e.omega_res - omega))

    def to_csv(self, path):
        rows = [
            (e.alpha, e.beta, e.omega_res, e.coupling, e.allowed, self.scenario)
            for e in self.entries
        ]
        return io.write_csv(path, ("alpha", "beta", "omega_res", "coupling", "allowed", "scenario"), rows)


def resonance_catalog(solution: EigenSolution, omega1: float) -> ResonanceCatalog:
    gamma = solution.sigma_x_matrix().real
    entries = tuple(
        effective_coupling(solution, a, b, omega1, gamma)
        for a in ("11", "12")
        for b in ("21", "22")
    )
    allowed = [e for e in entries if e.allowed]
    if abs(solution.lower_splitting()) < NEAR_DEGENERATE:
        scenario = "degenerate-single"
    elif (
        len(allowed) == 2
        and {e.alpha for e in allowed} == {"11", "12"}
        and abs(allowed[0].omega_res - allowed[1].omega_res)
        < OVERLAP_FACTOR * max(e.abs_coupling for e in allowed)
    ):
        scenario = "nondegenerate-double"
    else:
        scenario = "nondegenerate-single"
    return ResonanceCatalog(entries, scenario)


def averaging_window(catalog: ResonanceCatalog, omega: float, cap: float = 5000.0,
                     off_resonance: float = 2000.0, rabi_periods: float = 6.0) -> float:
    """Averaging window for time-averaged observables.

    Near an allowed first-order resonance (detuning below 5|V|) the window
    spans ``rabi_periods`` Rabi periods 2*pi/|V|, capped at ``cap``;
    otherwise ``off_resonance`` is used.
    """
    allowed = catalog.allowed()
    if allowed:
        entry = min(allowed, key=lambda e: abs(e.omega_res - omega))
        if abs(entry.omega_res - omega) <= OVERLAP_FACTOR * entry.abs_coupling:
            return min(cap, rabi_periods * 2 * math.pi / entry.abs_coupling)
    return off_resonance


def multiphoton_order(solution: EigenSolution, omega: float) -> tuple[int, float]:
    """Photon number m best matching m*omega = E22 - E11, and m*omega - gap."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    gap = solution.energy("22") - solution.energy("11")
    m = max(1, int(round(gap / omega)))
    return m, m * omega - gap


def localized_amplitudes() -> np.ndarray:
    """Four-state amplitudes of the left-localized initial state |1->."""
    return np.array([-1.0, 1.0, 0.0, 0.0], dtype=complex) / math.sqrt(2)


def find_lower_crossing(solve, gamma_lo: float, gamma_hi: float, xtol: float = 1e-6) -> float:
    """Root in gamma of the lower-pair quasienergy splitting.

    ``solve(gamma)`` must return a FourStateModel; the bracket must contain a
    sign change.
    """
    return float(brentq(lambda g: lower_pair_quasienergy_splitting(solve(g)), gamma_lo, gamma_hi, xtol=xtol))


__all__ = [name for name in dir() if not name.startswith("_")] + ["LABELS"]
