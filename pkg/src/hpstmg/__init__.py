"""Matrix-free hp space-time multigrid for the nonstationary Stokes equations.

Q_{r+1}/P_r^disc elements in space, DG(k) in time, a Vanka-smoothed
V-cycle as preconditioner for GMRES.
"""
from .dofs import PressureSpace, VelocitySpace, build_pressure_space, build_velocity_space
from .hierarchy import (
    LevelConfig,
    build_levels,
    combine_hierarchies,
    construct_hierarchy,
    format_hierarchy,
    instantiate_levels,
)
from .mesh import Mesh, build_cartesian
from .operators import SpaceTimeBlockOperator, SpatialOperators
from .solver import KrylovConfig, VCycleConfig, gmres, time_march, v_cycle
from .time_basis import temporal_matrices

__version__ = "0.1.0"

__all__ = [
    "KrylovConfig", "LevelConfig", "Mesh", "PressureSpace", "SpaceTimeBlockOperator",
    "SpatialOperators", "VCycleConfig", "VelocitySpace", "build_cartesian", "build_levels",
    "build_pressure_space", "build_velocity_space", "combine_hierarchies", "construct_hierarchy",
    "format_hierarchy", "gmres", "instantiate_levels", "temporal_matrices", "time_march", "v_cycle",
]
