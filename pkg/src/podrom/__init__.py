"""Finite-element full-order models and H1-weighted POD reduced-order models
for semilinear reaction-diffusion problems on the unit square."""

from .mesh_fem import (
    AssembledOperators,
    FemSpace,
    Mesh,
    assemble_operators,
    build_space,
    build_uniform_mesh,
    h1_seminorm,
    interpolate,
    l2_norm,
)
from .problems import ProblemSpec, ReactionSpec, brusselator_lifted, manufactured_problem
from .integrator import (
    IntegratorConfig,
    Trajectory,
    dense_eval,
    dense_eval_derivative,
    estimate_period,
    integrate_fom,
)
from .snapshots import (
    SnapshotSet,
    TimeGrid,
    build_derivative_snapshots,
    build_fd_snapshots,
    build_snapshots,
    equidistribute_grid,
    patch_grid,
    uniform_grid,
)
from .pod import (
    CorrelationMatrix,
    PodBasis,
    compute_pod_basis,
    correlation_matrix,
    pod_from_snapshots,
    project,
    select_r,
)
from .rom import RomModel, RomTrajectory, build_rom, integrate_rom, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AssembledOperators", "FemSpace", "Mesh", "assemble_operators",
    "build_space", "build_uniform_mesh", "h1_seminorm", "interpolate",
    "l2_norm", "ProblemSpec", "ReactionSpec", "brusselator_lifted",
    "manufactured_problem", "IntegratorConfig", "Trajectory", "dense_eval",
    "dense_eval_derivative", "estimate_period", "integrate_fom",
    "SnapshotSet", "TimeGrid", "build_derivative_snapshots",
    "build_fd_snapshots", "build_snapshots", "equidistribute_grid",
    "patch_grid", "uniform_grid", "CorrelationMatrix", "PodBasis",
    "compute_pod_basis", "correlation_matrix", "pod_from_snapshots",
    "project", "select_r", "RomModel", "RomTrajectory", "build_rom",
    "integrate_rom", "reconstruct",
]
