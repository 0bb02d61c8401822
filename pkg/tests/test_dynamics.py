import math

import numpy as np
import pytest

from socdw.dynamics import DriveProtocol, PropagationPlan, SplitStepPropagator, evolve, step
from socdw.model import ModelParams, SpatialGrid, SpinorField, inner
from socdw.observables import TrajectoryProbe
from socdw.stationary import localized_basis, solve_stationary


@pytest.fixture(scope="module")
def setup():
    grid = SpatialGrid(n=128)
    params = ModelParams(well_separation=1.7, gamma=1.112, omega=1.617)
    return grid, params, solve_stationary(params, grid)


def test_drive_protocol():
    d = DriveProtocol(1.0, 0.1, 2.0)
    assert d(0.0) == pytest.approx(1.1)
    assert d(math.pi / 2) == pytest.approx(0.9)
    assert d.period == pytest.approx(math.pi)


def test_plan_validation():
    with pytest.raises(ValueError):
        PropagationPlan(1.0, dt=0.0)
    with pytest.raises(ValueError):
        PropagationPlan(1e-4, dt=1e-3)
    with pytest.raises(ValueError):
        PropagationPlan(1.0, sample_stride=0)
    assert PropagationPlan(2.0, dt=1e-3).n_steps == 2000
    with pytest.raises(ValueError):
        PropagationPlan(10.0, dt=0.1).check(ModelParams(omega=100.0))


def test_norm_conserved(setup):
    grid, params, sol = setup
    prop = SplitStepPropagator(grid, params)
    psi = localized_basis(sol)["1-"].stacked()
    out = prop.advance(psi, 0.0, 1e-2, 2000)
    assert np.sum(np.abs(out) ** 2) * grid.dx == pytest.approx(1.0, abs=1e-12)


def test_undriven_eigenstate_is_stationary(setup):
    grid, params, sol = setup
    static = params.replace(omega1=0.0)
    s = sol.state("21")
    prop = SplitStepPropagator(grid, static)
    t = 5.0
    out = SpinorField.from_stacked(prop.advance(s.stacked(), 0.0, 1e-3, 5000))
    overlap = inner(s, out, grid)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-6)
    # phase exp(-i E t)
    assert np.angle(overlap * np.exp(1j * sol.energy("21") * t)) == pytest.approx(0.0, abs=1e-4)


def test_merged_steps_match_single_steps(setup):
    grid, params, sol = setup
    prop = SplitStepPropagator(grid, params)
    psi = localized_basis(sol)["1-"].stacked()
    merged = prop.advance(psi, 0.3, 1e-2, 20)
    single = psi
    for j in range(20):
        single = prop.step(single, 0.3 + j * 1e-2, 1e-2)
    assert np.allclose(merged, single, atol=1e-12)
    once = step(SpinorField.from_stacked(psi), 0.3, 1e-2, params, grid)
    assert np.allclose(once.stacked(), prop.step(psi, 0.3, 1e-2))


def test_advance_does_not_modify_input(setup):
    grid, params, sol = setup
    psi = localized_basis(sol)["1-"].stacked()
    keep = psi.copy()
    SplitStepPropagator(grid, params).advance(psi, 0.0, 1e-3, 3)
    assert np.array_equal(psi, keep)


def test_second_order_convergence(setup):
    grid, params, sol = setup
    prop = SplitStepPropagator(grid, params)
    psi = localized_basis(sol)["1-"].stacked()
    ref = prop.advance(psi, 0.0, 1 / 1600, 1600)
    errs = [np.linalg.norm(prop.advance(psi, 0.0, 1 / n, n) - ref) for n in (50, 100, 200)]
    assert errs[0] / errs[1] == pytest.approx(4, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4, abs=0.5)


def test_evolve_samples_and_final_state(setup):
    grid, params, sol = setup
    plan = PropagationPlan(1.0, dt=1e-2, sample_stride=30)
    rec = evolve(localized_basis(sol)["1-"], plan, params, grid, TrajectoryProbe(grid, sol))
    # samples at 0, 0.3, 0.6, 0.9 and the end point 1.0
    assert np.allclose(rec.times, [0, 0.3, 0.6, 0.9, 1.0])
    assert rec.final_state is not None
    assert np.allclose(rec.p_left + rec.p_right, 1.0)
    assert np.allclose(rec.norm, 1.0)


def test_evolve_aborts_on_nan(setup):
    grid, params, _ = setup
    bad = SpinorField(np.full(grid.n, np.nan), np.zeros(grid.n))
    with pytest.raises(FloatingPointError):
        evolve(bad, PropagationPlan(0.1, 1e-2, 5), params, grid)


def test_undriven_localized_state_stays_left(setup):
    grid, params, sol = setup
    static = params.replace(omega1=0.0)
    plan = PropagationPlan(100.0, dt=1e-2, sample_stride=500)
    rec = evolve(localized_basis(sol)["1-"], plan, static, grid)
    assert rec.p_left[0] > 0.99
    assert np.all(rec.p_left > rec.p_left[0] - 1e-3)
