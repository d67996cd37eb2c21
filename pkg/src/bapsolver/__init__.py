"""Best-approximation solvers: project a point onto an intersection of
convex sets via cyclic, simultaneous, tree-structured, halfspace-buffered,
and accelerated dual methods, with runtime convergence certificates."""

from .geometry import (
    AffineSubspace,
    Ball,
    Box,
    CartesianProduct,
    Halfspace,
    Hyperplane,
    Polyhedron,
    ProjectionResult,
    WholeSpace,
    distance,
    project,
    scale,
    support,
    supporting_halfspace,
)
from .polytope_qp import (
    Infeasible,
    IterationLimit,
    PolyhedralProjection,
    dual_decompose,
    project_polyhedron,
)
from .problem import (
    DualState,
    MaxSweepsExceeded,
    Problem,
    SolveTrace,
    StoppingRule,
    max_distance,
    project_any,
    project_point_any,
)
from .dykstra import (
    HalfspaceBuffer,
    centered_dual_objective,
    dual_objective,
    dykstra_solve,
    dykstra_sweep,
    extended_dual_objective,
    extended_dykstra_solve,
    shqp_refine,
)
from .product_space import (
    ProductLift,
    TreeNode,
    TreeTopology,
    product_lift,
    simultaneous_dykstra_solve,
    tree_dykstra_solve,
)
from .apg import (
    MaxIterationsExceeded,
    apg_solve,
    apg_threshold_index,
    prox_support,
    theta_schedule_next,
)
from .cli import (
    EXIT_INPUT_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_SOLVER_ERROR,
    DimensionMismatch,
    ParseError,
    RunOptions,
    SchemaError,
    load_problem,
    main,
    parse_problem,
    run,
    save_problem,
    write_trace,
)
from .diagnostics import (
    BoundednessReport,
    EnvelopeReport,
    InnerMonitor,
    RateBound,
    RateCertificate,
    am_rate_envelope,
    boundedness_monitor,
    dual_change_budget,
    inner_monitor,
    optimality_gap,
    rate_bound_harmonic,
    rate_bound_mixed,
    rate_certificate,
    rate_threshold_index,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "Ball",
    "Box",
    "BoundednessReport",
    "CartesianProduct",
    "DimensionMismatch",
    "DualState",
    "EXIT_INPUT_ERROR",
    "EXIT_NOT_CONVERGED",
    "EXIT_OK",
    "EXIT_SOLVER_ERROR",
    "EnvelopeReport",
    "Halfspace",
    "HalfspaceBuffer",
    "Hyperplane",
    "Infeasible",
    "InnerMonitor",
    "IterationLimit",
    "MaxIterationsExceeded",
    "MaxSweepsExceeded",
    "ParseError",
    "PolyhedralProjection",
    "Polyhedron",
    "Problem",
    "ProductLift",
    "ProjectionResult",
    "RateBound",
    "RateCertificate",
    "RunOptions",
    "SchemaError",
    "SolveTrace",
    "StoppingRule",
    "TreeNode",
    "TreeTopology",
    "WholeSpace",
    "am_rate_envelope",
    "apg_solve",
    "apg_threshold_index",
    "boundedness_monitor",
    "centered_dual_objective",
    "distance",
    "dual_change_budget",
    "dual_decompose",
    "dual_objective",
    "dykstra_solve",
    "dykstra_sweep",
    "extended_dual_objective",
    "extended_dykstra_solve",
    "inner_monitor",
    "load_problem",
    "main",
    "max_distance",
    "optimality_gap",
    "parse_problem",
    "product_lift",
    "project",
    "project_any",
    "project_point_any",
    "project_polyhedron",
    "prox_support",
    "rate_bound_harmonic",
    "rate_bound_mixed",
    "rate_certificate",
    "rate_threshold_index",
    "run",
    "save_problem",
    "scale",
    "shqp_refine",
    "simultaneous_dykstra_solve",
    "support",
    "supporting_halfspace",
    "theta_schedule_next",
    "tree_dykstra_solve",
    "write_trace",
]
