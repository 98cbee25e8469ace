"""Stress-driven anisotropic growth: material kernels, a hexahedral FE solver and a CLI."""

__version__ = "0.1.0"

from .errors import (AsymmetricInputError, ConfigError, DegenerateDirectionError, ElementInversionError,
                     LocalConvergenceError, NotSPDError, SingularMatrixError, StepFailureError,
                     StressGrowthError)
from .growth import (TABLE1, GrowthParams, GrowthState, LocalReport, MaterialResponse, PotentialGrowthMaterial,
                     consistent_tangent, local_solve, update_material_point)
from .isotropic import IsoParams, IsoState, IsotropicGrowthMaterial, iso_update
from .mesh import Mesh, build_block_mesh, build_stripe_mesh
from .fem import BCSchedule, DirichletBC, SolveConfig, Solver, TimeFunction

__all__ = [
    "__version__",
    "AsymmetricInputError", "ConfigError", "DegenerateDirectionError", "ElementInversionError",
    "LocalConvergenceError", "NotSPDError", "SingularMatrixError", "StepFailureError", "StressGrowthError",
    "TABLE1", "GrowthParams", "GrowthState", "LocalReport", "MaterialResponse", "PotentialGrowthMaterial",
    "consistent_tangent", "local_solve", "update_material_point",
    "IsoParams", "IsoState", "IsotropicGrowthMaterial", "iso_update",
    "Mesh", "build_block_mesh", "build_stripe_mesh",
    "BCSchedule", "DirichletBC", "SolveConfig", "Solver", "TimeFunction",
]
