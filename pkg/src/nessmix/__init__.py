"""Ordered n-site mixture densities and steady-state mixtures.

The main entry points are re-exported here; see the submodules for the
full API.
"""

from .closed_forms import DirichletFamily, GappedFamily, OrderStatsFamily
from .core import (
    BoundaryPair,
    DensityFamily,
    Interval,
    OrderedTuple,
    limiting_boundary,
    make_boundary,
    validate_ordered,
)
from .errors import ConfigError, NessMixError, NumericError
from .kernels import (
    GeneratingFactor,
    distance_kernel,
    exp_kernel,
    expression_kernel,
    power_kernel,
    scale_only_kernel,
    shift_only_kernel,
)
from .ness import EquilibriumMarginal, MixtureSpec, estimate_covariance, estimate_profile, sample_ness
from .quadrature import QuadratureSpec
from .recursion import RecursionFamily, build_factors
from .sampling import RngHandle

__version__ = "0.1.0"

__all__ = [
    "BoundaryPair",
    "ConfigError",
    "DensityFamily",
    "DirichletFamily",
    "EquilibriumMarginal",
    "GappedFamily",
    "GeneratingFactor",
    "Interval",
    "MixtureSpec",
    "NessMixError",
    "NumericError",
    "OrderStatsFamily",
    "OrderedTuple",
    "QuadratureSpec",
    "RecursionFamily",
    "RngHandle",
    "build_factors",
    "distance_kernel",
    "estimate_covariance",
    "estimate_profile",
    "exp_kernel",
    "expression_kernel",
    "limiting_boundary",
    "make_boundary",
    "power_kernel",
    "sample_ness",
    "scale_only_kernel",
    "shift_only_kernel",
    "validate_ordered",
]
