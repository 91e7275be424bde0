"""Attributed graph clustering via coarsening and modularity maximization."""

from .graph import (
    AttributedGraph,
    DerivedMatrices,
    build_derived,
    coarsened_laplacian,
    labels_to_assignment,
)
from .metrics import (
    Evaluation,
    accuracy,
    ari,
    conductance,
    contingency_table,
    evaluate,
    modularity_score,
    modularity_score_pairwise,
    nmi,
)
from .sbm import SbmConfig, block_matrix_from_degrees, generate, generate_features
from .solver import (
    LossBreakdown,
    SolverConfig,
    SolverState,
    gradient_C,
    hard_assignments,
    kkt_residual,
    lipschitz_bound,
    loss,
    project_feasible,
    solve,
    update_C,
    update_XC,
)

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph",
    "DerivedMatrices",
    "build_derived",
    "coarsened_laplacian",
    "labels_to_assignment",
    "Evaluation",
    "accuracy",
    "ari",
    "conductance",
    "contingency_table",
    "evaluate",
    "modularity_score",
    "modularity_score_pairwise",
    "nmi",
    "SbmConfig",
    "block_matrix_from_degrees",
    "generate",
    "generate_features",
    "LossBreakdown",
    "SolverConfig",
    "SolverState",
    "gradient_C",
    "hard_assignments",
    "kkt_residual",
    "lipschitz_bound",
    "loss",
    "project_feasible",
    "solve",
    "update_C",
    "update_XC",
    "__version__",
]
