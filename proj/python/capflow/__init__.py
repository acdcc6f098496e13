"""Capillary curvature flow in the unit ball."""

from ._capflow import (
    CapflowError,
    FlowConfig,
    Grid,
    NotConverged,
    NumericalFailure,
    af_check,
    cap_center,
    cap_graph,
    cap_quermass,
    cap_radius_from_quermass,
    minkowski_residual,
    perturbed_cap,
    quermass,
    read_checkpoint,
    read_trajectory,
    run,
    scalar_rhs,
    shell_deltas,
)

__all__ = [
    "CapflowError",
    "FlowConfig",
    "Grid",
    "NotConverged",
    "NumericalFailure",
    "af_check",
    "cap_center",
    "cap_graph",
    "cap_quermass",
    "cap_radius_from_quermass",
    "minkowski_residual",
    "perturbed_cap",
    "quermass",
    "read_checkpoint",
    "read_trajectory",
    "run",
    "scalar_rhs",
    "shell_deltas",
]
