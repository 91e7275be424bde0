"""Graph representation and the derived matrices every other module consumes.

An attributed graph couples a sparse symmetric adjacency with an optional
dense feature matrix and optional ground-truth labels.  From it we derive
the degree vector d, the combinatorial Laplacian diag(d) - A, the modularity
matrix B = A - d d^T / 2e and the total edge volume 2e.  B has zero row and
column sums, so the all-ones vector is in its null space, mirroring the
Laplacian's spectral structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    AsymmetricAdjacency,
    DimensionMismatch,
    EmptyGraph,
    NegativeWeight,
    SelfLoop,
)

# Above this node count B is never materialized; products with B fall back to
# A @ M - d (d^T M) / 2e, which keeps the per-iteration cost bound intact.
DENSE_MODULARITY_LIMIT = 20_000

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class AttributedGraph:
    """Undirected weighted graph with optional node features and labels.

    adjacency: p x p sparse symmetric matrix, nonnegative weights, zero diagonal.
    features:  p x n dense matrix, or None for non-attributed graphs.
    labels:    length-p integer vector of ground-truth classes, or None.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        A = self.adjacency
        if not sp.issparse(A):
            A = sp.csr_matrix(np.asarray(A, dtype=np.float64))
        else:
            A = A.tocsr().astype(np.float64)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {A.shape}")
        diff = abs(A - A.T)
        if diff.nnz and diff.max() > _SYMMETRY_TOL:
            raise AsymmetricAdjacency(
                f"adjacency asymmetry {diff.max():.3e} exceeds {_SYMMETRY_TOL:.0e}"
            )
        if A.nnz and A.data.min() < 0:
            raise NegativeWeight("adjacency entries must be nonnegative")
        if np.any(A.diagonal() != 0):
            bad = np.flatnonzero(A.diagonal())
            raise SelfLoop(f"self-loops at nodes {bad[:10].tolist()}")
        A.eliminate_zeros()
        object.__setattr__(self, "adjacency", A)

        if self.features is not None:
            X = np.asarray(self.features, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] != A.shape[0]:
                raise DimensionMismatch(
                    f"features shape {X.shape} does not match p={A.shape[0]}"
                )
            object.__setattr__(self, "features", X)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.ndim != 1 or y.shape[0] != A.shape[0]:
                raise DimensionMismatch(
                    f"labels length {y.shape} does not match p={A.shape[0]}"
                )
            if y.size and y.min() < 0:
                raise ValueError("labels must be nonnegative integers")
            object.__setattr__(self, "labels", y)

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True)
class DerivedMatrices:
    """Degree vector, Laplacian, modularity matrix and edge volume of a graph.

    The modularity matrix is a rank-one update of the (sparse) adjacency and
    is stored dense only up to DENSE_MODULARITY_LIMIT nodes; `modularity_product`
    always works regardless of storage.
    """

    adjacency: sp.csr_matrix
    degree: np.ndarray
    laplacian: sp.csr_matrix
    two_e: float
    modularity_matrix: np.ndarray | None = field(repr=False, default=None)
    # Lazily filled by the solver with graph-level spectral norms.
    spectral_cache: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def p(self) -> int:
        return self.degree.shape[0]

    def modularity_product(self, M: np.ndarray) -> np.ndarray:
        """Compute B @ M without requiring a materialized B."""
        M = np.asarray(M, dtype=np.float64)
        if M.shape[0] != self.p:
            raise DimensionMismatch(f"operand has {M.shape[0]} rows, expected {self.p}")
        if self.modularity_matrix is not None:
            return self.modularity_matrix @ M
        d = self.degree
        return self.adjacency @ M - np.outer(d, d @ M) / self.two_e


def build_derived(graph: AttributedGraph, dense_limit: int = DENSE_MODULARITY_LIMIT) -> DerivedMatrices:
    """Compute degree, Laplacian, modularity matrix and 2e for a graph.

    Raises EmptyGraph when the graph has no edges (2e = 0), since the degree
    normalization in the modularity matrix is then undefined.
    """
    A = graph.adjacency
    d = np.asarray(A.sum(axis=1)).ravel()
    two_e = float(d.sum())
    if two_e <= 0:
        raise EmptyGraph("graph has no edges; modularity is undefined")
    laplacian = (sp.diags(d) - A).tocsr()
    B = None
    if graph.p <= dense_limit:
        B = A.toarray() - np.outer(d, d) / two_e
    return DerivedMatrices(
        adjacency=A, degree=d, laplacian=laplacian, two_e=two_e, modularity_matrix=B
    )


def coarsened_laplacian(C: np.ndarray, theta: sp.spmatrix | np.ndarray) -> np.ndarray:
    """Map a p x p Laplacian through an assignment matrix: C^T Theta C.

    For a hard 0/1 partition matrix the result is itself a valid Laplacian
    of the coarsened graph (symmetric, zero row sums, nonpositive
    off-diagonals).
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2:
        raise DimensionMismatch("assignment matrix must be 2-D")
    if theta.shape[0] != theta.shape[1] or theta.shape[0] != C.shape[0]:
        raise DimensionMismatch(
            f"assignment rows {C.shape[0]} do not match Laplacian size {theta.shape}"
        )
    if not np.all(np.isfinite(C)):
        raise ValueError("assignment matrix must be finite")
    TC = theta @ C
    out = C.T @ TC
    # Symmetrize to kill round-off skew; Theta itself is symmetric.
    return (out + out.T) / 2.0


def labels_to_assignment(labels: np.ndarray, k: int | None = None) -> np.ndarray:
    """One-hot encode an integer label vector into a hard assignment matrix."""
    y = np.asarray(labels, dtype=np.int64)
    if k is None:
        k = int(y.max()) + 1
    C = np.zeros((y.shape[0], k))
    C[np.arange(y.shape[0]), y] = 1.0
    return C
