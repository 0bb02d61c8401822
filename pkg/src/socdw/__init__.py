"""Driven spin-orbit-coupled atom in a symmetric double well.

Stationary eigenstructure, split-step dynamics, observables, the four-state
Floquet reduction and a scan harness with a command-line interface.
"""

__version__ = "0.1.0"

from .model import ModelParams, SpatialGrid, SpinorField  # noqa: E402
from .stationary import EigenSolution, localized_basis, solve_stationary  # noqa: E402

__all__ = [
    "__version__",
    "ModelParams",
    "SpatialGrid",
    "SpinorField",
    "EigenSolution",
    "solve_stationary",
    "localized_basis",
]
