"""Simulation and exponential-stability certificates for linear plants with backlash.

Modules
-------
convex_sets       support functions, projections and strong convexity of the backlash set
matrix_core       matrix exponentials, Lyapunov certificates, block eigenvalue bounds
linear_subsystem  plant model, periodic inputs, forced and periodic responses
sweeping_sim      catching-up simulation of the closed loop
localization      tube around the linearised trajectory and stationary backlash states
rate_analysis     path-length bounds and the exponent bound theta
scenario, cli     JSON scenarios and the command-line driver
"""

from .convex_sets import Ball, Ellipsoid
from .errors import BacklashError, ConfigError, DomainError, HypothesisError, IntegrityError, NumericalError
from .linear_subsystem import PeriodicInput, PlantModel, periodic_orbit
from .localization import TubeCrossSection, stationary_emptiness, stationary_membership, tube_check
from .rate_analysis import build_certificate, measure_exponent, path_length_bounds, psi, search_lambda
from .sweeping_sim import SimConfig, pair_simulate, simulate

__all__ = [
    "Ball", "Ellipsoid", "PlantModel", "PeriodicInput", "SimConfig", "TubeCrossSection",
    "BacklashError", "ConfigError", "DomainError", "HypothesisError", "IntegrityError", "NumericalError",
    "periodic_orbit", "simulate", "pair_simulate", "tube_check", "stationary_membership",
    "stationary_emptiness", "build_certificate", "search_lambda", "measure_exponent",
    "path_length_bounds", "psi",
]
