import pytest

from socdw.model import ModelParams, SpatialGrid
from socdw.stationary import solve_stationary

ACCEPTANCE_LINES = []

# parameter points used throughout: (well_separation, gamma)
DEGEN = dict(well_separation=1.7, gamma=1.112)
SINGLE = dict(well_separation=1.7, gamma=1.5)
DOUBLE = dict(well_separation=2.0, gamma=0.725)


@pytest.fixture(scope="session")
def grid256():
    return SpatialGrid(n=256)


@pytest.fixture(scope="session")
def small_solutions(grid256):
    """Coarse-grid eigen-solutions at the three reference points."""
    return {
        name: solve_stationary(ModelParams(**kw), grid256)
        for name, kw in (("degen", DEGEN), ("single", SINGLE), ("double", DOUBLE))
    }


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
