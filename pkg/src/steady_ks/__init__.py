"""Stationary states of the diffusion-dominated Keller-Segel model.

Lane-Emden profiles, their scaling and mass map, the phase-plane picture, the free
energy with its HLS lower bound, the obstacle-problem check and a direct discrete
minimiser used as an independent oracle.
"""

from .ball_minimizer import DiscreteDensity, MinimizeOptions, MinimizeResult, minimize, mu_curve
from .free_energy import EnergyReport, HLSConfig, RadialDensity, energy, energy_lower_bound
from .lane_emden import (
    CriticalCaseError,
    ProfileError,
    ProfileParams,
    RadialProfile,
    Tolerances,
    picard_oracle,
    solve_profile,
)
from .obstacle import ObstacleReport, boundary_flatness, verify_obstacle
from .phase_plane import check_invariants, fixed_points, to_phase
from .scaling import MassMap, alpha_of_mass, canonical_profile, rescale

__version__ = "0.1.0"

__all__ = [
    "CriticalCaseError",
    "DiscreteDensity",
    "EnergyReport",
    "HLSConfig",
    "MassMap",
    "MinimizeOptions",
    "MinimizeResult",
    "ObstacleReport",
    "ProfileError",
    "ProfileParams",
    "RadialDensity",
    "RadialProfile",
    "Tolerances",
    "alpha_of_mass",
    "boundary_flatness",
    "canonical_profile",
    "check_invariants",
    "energy",
    "energy_lower_bound",
    "fixed_points",
    "minimize",
    "mu_curve",
    "picard_oracle",
    "rescale",
    "solve_profile",
    "to_phase",
    "verify_obstacle",
]
