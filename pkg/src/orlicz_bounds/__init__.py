"""Orlicz-type increment bounds for processes on normed balls."""

from .bounds import BoundsReport, lower_constant, solve_level, total_bound
from .errors import (ConfigError, DivergentTerm1, InfiniteLevel, NumericalError,
                     OrliczBoundsError)
from .extremal import DensityG, build_density, evaluate_path
from .geometry import Modulus, NormSpace, dual_norm, sample_ball
from .orlicz import OrliczFunction, conjugate, inverse, luxemburg_norm, power, young_gap
from .partition import Partition, build_partition
from .sobolev import check_oscillation_bound, holder_check, optimal_AB

__all__ = [
    "BoundsReport", "ConfigError", "DensityG", "DivergentTerm1", "InfiniteLevel", "Modulus",
    "NormSpace", "NumericalError", "OrliczBoundsError", "OrliczFunction", "Partition",
    "build_density", "build_partition", "check_oscillation_bound", "conjugate", "dual_norm",
    "evaluate_path", "holder_check", "inverse", "lower_constant", "luxemburg_norm",
    "optimal_AB", "power", "sample_ball", "solve_level", "total_bound", "young_gap",
]
