"""Discretisation substrate: polar grids, the discrete Laplacian, solves, quadrature."""
from .fields import RadialGrid, ScalarField
from .grid import PolarGrid, build_pole_chart, build_polar_grid
from .operators import (
    SparseOperator,
    discrete_delta,
    discrete_laplacian,
    radial_operator,
    smallest_eigenpair,
    solve_dirichlet,
    solve_load,
)
from .quadrature import adaptive_quadrature

__all__ = [
    "PolarGrid", "RadialGrid", "ScalarField", "SparseOperator", "adaptive_quadrature",
    "build_pole_chart", "build_polar_grid", "discrete_delta", "discrete_laplacian",
    "radial_operator", "smallest_eigenpair", "solve_dirichlet", "solve_load",
]
