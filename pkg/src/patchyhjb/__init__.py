"""Minimum-time HJB solvers with dynamics-driven domain decomposition.

Semi-Lagrangian value iteration on structured grids, classical overlapping
domain decomposition, and a patchy decomposition that lets a cheap coarse
solve carve the domain into independently solvable patches.
"""

from .analysis import (
    ErrorReport,
    Trajectory,
    error_report,
    export_field,
    read_field_csv,
    trace_trajectory,
)
from .decomp import (
    StaticDecomposition,
    make_static_decomposition,
    solve_dd,
    solve_single,
)
from .grid import (
    SENTINEL,
    ConfigurationError,
    Grid,
    NodeField,
    OutOfDomainError,
    interpolate,
    interpolate_many,
    locate_cell,
)
from .patchy import (
    OBSTACLE,
    TARGET,
    UNCOVERED,
    UNREACHABLE,
    PatchMap,
    PatchyConfig,
    PatchyResult,
    assemble_patches,
    coarse_solve_and_lift,
    mask_unreachable,
    run_patchy,
    solve_patches,
    transport_color,
)
from .problems import (
    PRESET_NAMES,
    ControlSet,
    ObstacleSet,
    ProblemSpec,
    TargetSpec,
    discretize_circle,
    discretize_sphere_geodesic,
    partition_target,
    preset,
)
from .runtime import (
    METHOD1,
    METHOD2,
    SERIAL,
    ExecutionStrategy,
    RunStats,
)
from .solver import (
    DIRICHLET,
    STATE_CONSTRAINT,
    CandidateTable,
    FeedbackField,
    SolverConfig,
    SweepStats,
    evaluate_candidates,
    extract_feedback,
    init_value_field,
    reduce_controls,
    relax_node,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "SENTINEL",
    "ConfigurationError",
    "Grid",
    "NodeField",
    "OutOfDomainError",
    "interpolate",
    "interpolate_many",
    "locate_cell",
    "ControlSet",
    "ObstacleSet",
    "ProblemSpec",
    "TargetSpec",
    "PRESET_NAMES",
    "preset",
    "discretize_circle",
    "discretize_sphere_geodesic",
    "partition_target",
    "SolverConfig",
    "SweepStats",
    "CandidateTable",
    "FeedbackField",
    "STATE_CONSTRAINT",
    "DIRICHLET",
    "solve",
    "relax_node",
    "evaluate_candidates",
    "extract_feedback",
    "reduce_controls",
    "init_value_field",
    "StaticDecomposition",
    "make_static_decomposition",
    "solve_dd",
    "solve_single",
    "PatchyConfig",
    "PatchMap",
    "PatchyResult",
    "TARGET",
    "UNREACHABLE",
    "OBSTACLE",
    "UNCOVERED",
    "run_patchy",
    "coarse_solve_and_lift",
    "mask_unreachable",
    "transport_color",
    "assemble_patches",
    "solve_patches",
    "ExecutionStrategy",
    "RunStats",
    "SERIAL",
    "METHOD1",
    "METHOD2",
    "ErrorReport",
    "Trajectory",
    "error_report",
    "trace_trajectory",
    "export_field",
    "read_field_csv",
]
