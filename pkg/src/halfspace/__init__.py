"""
Potential theory on the upper half-space ``R^{N-1} x (0, inf)``.

Green and Poisson kernels with their explicit bounds, Radon-measure data,
representation formulas ``h x_N + P[nu] + G[mu]``, ring conditions at
infinity, weak formulations and boundary traces, and the lift to
``R^{N+2}`` that turns half-space superharmonics into whole-space ones.
"""

from .errors import (
    CoincidentPointsError,
    HalfSpaceError,
    MeasureError,
    PreconditionError,
    QuadratureError,
)
from .fields import ScalarField, expression_field, fd_laplacian, linear_field
from .geometry import CylinderBall, HalfSpacePoint, LevelSetRing, constants, cyl_norm, mirror
from .kernels import fundamental, grad_green, grad_green_sq, green, poisson
from .measures import BoundaryMeasure, InteriorMeasure, load_measure, total_decay_functional, weighted_mass
from .potentials import (
    RepresentationTriple,
    estimate_h,
    green_potential,
    lower_bound_check,
    poisson_integral,
    represent,
)
from .quadrature import DEFAULT_SPEC, QuadratureSpec

__version__ = "0.1.0"

__all__ = [
    "BoundaryMeasure",
    "CoincidentPointsError",
    "CylinderBall",
    "DEFAULT_SPEC",
    "HalfSpaceError",
    "HalfSpacePoint",
    "InteriorMeasure",
    "LevelSetRing",
    "MeasureError",
    "PreconditionError",
    "QuadratureError",
    "QuadratureSpec",
    "RepresentationTriple",
    "ScalarField",
    "constants",
    "cyl_norm",
    "estimate_h",
    "expression_field",
    "fd_laplacian",
    "fundamental",
    "grad_green",
    "grad_green_sq",
    "green",
    "green_potential",
    "linear_field",
    "load_measure",
    "lower_bound_check",
    "mirror",
    "poisson",
    "poisson_integral",
    "represent",
    "total_decay_functional",
    "weighted_mass",
]
