"""Numerical toolkit for ground states of the focusing cubic NLS in three dimensions.

Radial ground states, the linearized matrix operator and its unstable pair,
Riesz projections, modulation of moving solitons, time stepping, shooting for
the centre-stable correction and dispersive diagnostics.
"""
__version__ = "0.1.0"

from .errors import NLSLabError
from .grid import Grid3D, SpinorField
from .ground_state import RadialGrid, RadialProfile, grid_ground_state, lift_to_grid, solve_ground_state
from .hamiltonian import LinearizedOperator, assemble

__all__ = [
    "__version__",
    "NLSLabError",
    "Grid3D",
    "SpinorField",
    "RadialGrid",
    "RadialProfile",
    "solve_ground_state",
    "grid_ground_state",
    "lift_to_grid",
    "LinearizedOperator",
    "assemble",
]
