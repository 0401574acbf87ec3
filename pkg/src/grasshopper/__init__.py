"""Grasshopper lawns: jump probabilities, stability of the disk and half-space, and lattice optimization."""
from .analytic import (
    R02,
    R03,
    ProblemSpec,
    ball_probability,
    disk_first_zero,
    disk_probability,
    disk_stability,
    halfspace_stability,
    most_unstable_modes,
)
from .errors import ConfigurationError, DomainError, GrasshopperError

__version__ = "0.1.0"

__all__ = [
    "R02",
    "R03",
    "ProblemSpec",
    "ball_probability",
    "disk_first_zero",
    "disk_probability",
    "disk_stability",
    "halfspace_stability",
    "most_unstable_modes",
    "ConfigurationError",
    "DomainError",
    "GrasshopperError",
]
