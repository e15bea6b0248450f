"""Localization-landscape predictions for periodic Schrodinger operators with random potentials.

A single solve of ``H u = 1`` gives the effective potential ``W = 1/u``;
its wells predict where low eigenfunctions live, their eigenvalues, and the
bottom of the counting function. A shift-invert Lanczos oracle checks every
prediction.
"""

__version__ = "0.1.0"

from .core import Grid, ScalarField, argmax_field, argmin_field, integrate, make_grid, neighbors
from .geometry import BasinMap, Region, Well, local_minima, sublevel_component, w_distance, watershed_basins
from .landscape import LandscapePair, check_landscape_bound, compute_landscape, conjugated_residual, lower_bounds
from .operator import DiscreteOperator, SolveReport, SolverError, apply_h, make_operator, solve_spd
from .potential import Potential, Rng, gen_bernoulli, gen_correlated_1d, gen_correlated_2d, gen_uniform, sample_on_grid
from .predict import (
    bump_constant,
    counting_function,
    dos_histogram,
    match_locations,
    predict_eigenvalues,
    ratio_stats,
    support_regions,
    weyl_counting,
)
from .spectra import EigenPair, eigen_residual, eigenpairs_below, smallest_eigenpairs, square_well_eigenvalue

__all__ = [
    "__version__",
    "Grid",
    "ScalarField",
    "argmax_field",
    "argmin_field",
    "integrate",
    "make_grid",
    "neighbors",
    "BasinMap",
    "Region",
    "Well",
    "local_minima",
    "sublevel_component",
    "w_distance",
    "watershed_basins",
    "LandscapePair",
    "check_landscape_bound",
    "compute_landscape",
    "conjugated_residual",
    "lower_bounds",
    "DiscreteOperator",
    "SolveReport",
    "SolverError",
    "apply_h",
    "make_operator",
    "solve_spd",
    "Potential",
    "Rng",
    "gen_bernoulli",
    "gen_correlated_1d",
    "gen_correlated_2d",
    "gen_uniform",
    "sample_on_grid",
    "bump_constant",
    "counting_function",
    "dos_histogram",
    "match_locations",
    "predict_eigenvalues",
    "ratio_stats",
    "support_regions",
    "weyl_counting",
    "EigenPair",
    "eigen_residual",
    "eigenpairs_below",
    "smallest_eigenpairs",
    "square_well_eigenvalue",
]
