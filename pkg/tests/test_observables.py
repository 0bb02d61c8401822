import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socdw.model import SpatialGrid, SpinorField, normalize
from socdw.observables import (
    TRAJECTORY_HEADER,
    TrajectoryProbe,
    TrajectoryRecord,
    beat_spectrum,
    eigenstate_projection,
    spin_polarization,
    time_average,
    well_probability,
    well_weights,
)
from socdw.stationary import localized_basis

GRID = SpatialGrid(n=64)


def test_well_weights_partition():
    left, right = well_weights(GRID, "left"), well_weights(GRID, "right")
    assert np.allclose(left + right, 1.0)
    assert left[GRID.n // 2] == 0.5 and left[0] == 0.5
    assert np.array_equal(left[GRID.mirror_index], right)
    with pytest.raises(ValueError):
        well_weights(GRID, "middle")


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    f = normalize(SpinorField(rng.normal(size=64) + 1j * rng.normal(size=64),
                              rng.normal(size=64) + 1j * rng.normal(size=64)), GRID)
    assert well_probability(f, GRID, "left") + well_probability(f, GRID, "right") == pytest.approx(1.0)
    s = [spin_polarization(f, GRID, a) for a in "xyz"]
    assert sum(v * v for v in s) <= 0.25 + 1e-12


def test_spin_polarization_of_sigma_x_eigenspinor():
    g = np.exp(-GRID.x**2)
    f = normalize(SpinorField(g, g), GRID)
    assert spin_polarization(f, GRID, "x") == pytest.approx(0.5)
    assert spin_polarization(f, GRID, "z") == pytest.approx(0.0)
    h = normalize(SpinorField(g, 1j * g), GRID)
    assert spin_polarization(h, GRID, "y") == pytest.approx(0.5)


def test_probe_matches_functions(small_solutions):
    sol = small_solutions["degen"]
    grid = sol.grid
    f = localized_basis(sol)["1-"]
    row = TrajectoryProbe(grid, sol)(f.stacked())
    assert row[0] == pytest.approx(well_probability(f, grid, "left"))
    assert row[2] == pytest.approx(spin_polarization(f, grid, "x"))
    assert row[4] == pytest.approx(spin_polarization(f, grid, "z"), abs=1e-12)
    p, total = eigenstate_projection(f, sol)
    assert np.allclose(row[5:9], p)
    assert np.allclose(p, [0.5, 0.5, 0, 0], atol=1e-12)
    assert total == pytest.approx(1.0)


def test_probe_rejects_other_grid(small_solutions):
    with pytest.raises(ValueError):
        TrajectoryProbe(SpatialGrid(n=128), small_solutions["degen"])


def test_time_average():
    t = np.linspace(0, 4 * math.pi, 4001)
    assert time_average(np.cos(t), t) == pytest.approx(0.0, abs=1e-6)
    assert time_average(np.full_like(t, 0.7), t) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        time_average([1.0], [0.0])


def _record(n=11):
    t = np.linspace(0, 1, n)
    zeros = np.zeros(n)
    return TrajectoryRecord(t, 1 - t / 2, t / 2, zeros, zeros, zeros, zeros, zeros, zeros,
                            zeros, zeros, np.ones(n))


def test_record_csv_and_window(tmp_path):
    rec = _record()
    path = rec.to_csv(tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_HEADER)
    assert len(lines) == 12
    assert len(rec.window(0.5)) == 6
    assert rec.averages()["p_left"] == pytest.approx(0.75)


def test_beat_spectrum_two_tones():
    dt, n = 0.5, 30000
    t = dt * np.arange(n)
    f1, f2 = 0.0537, 0.0514
    y = 0.5 + 0.25 * (np.cos(f1 * t) + np.cos(f2 * t))
    spec = beat_spectrum(y, t, beat_frequency=f1 - f2)
    matched = spec.match({"f1": f1, "f2": -f2})
    for peak, dist in matched.values():
        assert dist <= spec.resolution
    assert len(spec.peaks) == 2
    assert spec.total_power() == pytest.approx(np.var(y), rel=1e-6)


@given(st.integers(0, 2**32 - 1), st.sampled_from([63, 64, 200, 201]))
@settings(max_examples=25, deadline=None)
def test_parseval(seed, n):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    spec = beat_spectrum(y, np.arange(n, dtype=float))
    assert spec.total_power() == pytest.approx(np.var(y), rel=1e-6)


def test_beat_spectrum_errors():
    t = np.arange(100.0)
    with pytest.raises(ValueError, match="t_final >= "):
        beat_spectrum(np.cos(t), t, beat_frequency=0.01)
    t2 = np.sort(np.random.default_rng(1).uniform(0, 10, 100))
    with pytest.raises(ValueError, match="uniform"):
        beat_spectrum(np.cos(t2), t2)


def test_peaks_sidecar(tmp_path):
    t = np.arange(4000) * 0.5
    spec = beat_spectrum(np.cos(0.3 * t), t)
    path = spec.peaks_to_csv(tmp_path / "p.csv", {"f0": 0.3})
    lines = path.read_text().splitlines()
    assert lines[0] == "omega_peak,amplitude,analytic_label"
    assert lines[1].endswith(",f0")
