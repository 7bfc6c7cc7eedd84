"""Numerical lab for the focusing inhomogeneous NLS with weight |x|^{-b}."""
__version__ = "0.1.0"

from .params import ProblemParams, build_exponent_family, make_params, theta_window, validate_params
from .spectral import Grid, SpectralField, make_weight
from .groundstate import GroundState, solve_ground_state
from .evolution import EvolutionConfig, Trajectory, evolve
