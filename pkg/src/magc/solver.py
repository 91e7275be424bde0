"""Block majorization-minimization solver for coarsening-based clustering.

The objective couples four ingredients over a soft assignment matrix C
(p x k, rows in the intersection of the nonnegative orthant and the unit
ball) and coarsened features X_C (k x n):

    smoothness   tr(X_C^T C^T Theta C X_C)        Dirichlet energy of the coarse graph
    relaxation   (alpha/2) ||X - C X_C||_F^2      soft coupling X ~ C X_C
    modularity   -(beta/2e) tr(C^T B C)           cluster quality on the original graph
    connectivity -gamma log det(C^T Theta C + J)  keeps the coarse graph connected
    sparsity     (lambda/2) ||C 1_k||_2^2         optional one-cluster-per-node pressure

with J = (1/k) 1_{k x k}.  C is updated by a projected gradient step whose
step size 1/L comes from either an analytic curvature bound or backtracking,
and X_C by its closed-form minimizer.  Each sweep never increases the total.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    InvalidConfig,
    MissingFeatures,
    NonFinite,
    SingularCoarseLaplacian,
    SingularSystem,
)
from .graph import AttributedGraph, DerivedMatrices, build_derived

logger = logging.getLogger(__name__)

STEP_POLICIES = ("analytic-bound", "backtracking")
INIT_SCHEMES = ("random-uniform", "degree-seeded")

# Diagonal jitter escalation for the coarse-Laplacian factorization.
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6)

_ZERO_COLUMN_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Weights, step-size policy, stopping criteria and reproducibility knobs."""

    k: int
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lambda_: float = 0.0
    max_iters: int = 1000
    rel_tol: float = 1e-7
    step_policy: str = "backtracking"
    backtracking_shrink: float = 1.0 / 16.0
    init: str = "random-uniform"
    seed: int = 0
    # Compatibility switch: replace the exact per-row projection with
    # nonnegative clipping followed by division by the sum of row norms.
    global_row_normalization: bool = False

    def validate(self, p: int | None = None) -> None:
        for name in ("alpha", "beta", "gamma", "lambda_"):
            w = getattr(self, name)
            if not np.isfinite(w) or w < 0:
                raise InvalidConfig(f"{name} must be finite and >= 0, got {w}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if p is not None and self.k > p:
            raise InvalidConfig(f"k={self.k} exceeds node count p={p}")
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be positive")
        if not (self.rel_tol > 0):
            raise InvalidConfig("rel_tol must be > 0")
        if self.step_policy not in STEP_POLICIES:
            raise InvalidConfig(f"step_policy must be one of {STEP_POLICIES}")
        if not (0.0 < self.backtracking_shrink < 1.0):
            raise InvalidConfig("backtracking_shrink must lie in (0, 1)")
        if self.init not in INIT_SCHEMES:
            raise InvalidConfig(f"init must be one of {INIT_SCHEMES}")


@dataclass(frozen=True)
class LossBreakdown:
    """Raw term values plus the weighted total for one iterate."""

    smoothness: float
    modularity: float
    logdet: float
    relaxation: float
    sparsity: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "smoothness": self.smoothness,
            "modularity": self.modularity,
            "logdet": self.logdet,
            "relaxation": self.relaxation,
            "sparsity": self.sparsity,
            "total": self.total,
        }


@dataclass
class SolverState:
    """Iterates and bookkeeping of one solver run."""

    C: np.ndarray
    X_C: np.ndarray
    t: int
    loss_trace: list[LossBreakdown]
    step_L: float
    converged: bool = False
    xc_residual_max: float = 0.0
    reseeded_columns: int = 0


def _ones_shift(k: int) -> np.ndarray:
    return np.full((k, k), 1.0 / k)


def _chol_shifted(theta_C: np.ndarray):
    """Cholesky of theta_C + J with diagonal jitter escalation.

    Returns (factor, logdet).  Raises SingularCoarseLaplacian when the matrix
    stays indefinite even at the largest jitter.
    """
    k = theta_C.shape[0]
    M = theta_C + _ones_shift(k)
    if not np.all(np.isfinite(M)):
        raise SingularCoarseLaplacian("coarse Laplacian contains non-finite entries")
    for jit in _JITTERS:
        try:
            cho = sla.cho_factor(M + jit * np.eye(k), lower=True)
        except sla.LinAlgError:
            continue
        if jit > 0:
            logger.debug("coarse factorization needed jitter %.0e", jit)
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
        return cho, logdet
    raise SingularCoarseLaplacian(
        "C^T Theta C + J is not positive definite (degenerate assignment)"
    )


def loss(
    C: np.ndarray,
    X_C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> LossBreakdown:
    """Evaluate all objective terms at (C, X_C).

    total = smoothness + alpha * relaxation - (beta/2e) * modularity
            - gamma * logdet + lambda * sparsity
    """
    _check_dims(C, X_C, derived, X)
    TC = derived.laplacian @ C
    theta_C = C.T @ TC
    theta_C = (theta_C + theta_C.T) / 2.0
    smooth = float(np.sum(X_C * (theta_C @ X_C)))

    mod = float(np.sum(C * derived.modularity_product(C)))

    if cfg.gamma > 0:
        _, logdet = _chol_shifted(theta_C)
    else:
        logdet = 0.0

    R = C @ X_C - X
    relax = 0.5 * float(np.sum(R * R))

    row_sums = C.sum(axis=1)
    sparsity = 0.5 * float(row_sums @ row_sums)

    total = (
        smooth
        + cfg.alpha * relax
        - (cfg.beta / derived.two_e) * mod
        - cfg.gamma * logdet
        + cfg.lambda_ * sparsity
    )
    return LossBreakdown(smooth, mod, logdet, relax, sparsity, total)


def gradient_C(
    C: np.ndarray,
    X_C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> np.ndarray:
    """Gradient of the C-subproblem objective at fixed X_C.

    Sum of the smoothness, relaxation, modularity, connectivity and (when
    lambda > 0) sparsity contributions; the only inverse taken is of the
    k x k shifted coarse Laplacian.
    """
    _check_dims(C, X_C, derived, X)
    TC = derived.laplacian @ C
    G = 2.0 * (TC @ (X_C @ X_C.T))
    G += cfg.alpha * ((C @ X_C - X) @ X_C.T)
    # beta/e = 2*beta/2e
    if cfg.beta != 0:
        G -= (2.0 * cfg.beta / derived.two_e) * derived.modularity_product(C)
    if cfg.gamma > 0:
        theta_C = C.T @ TC
        cho, _ = _chol_shifted((theta_C + theta_C.T) / 2.0)
        G -= 2.0 * cfg.gamma * sla.cho_solve(cho, TC.T).T
    if cfg.lambda_ > 0:
        G += cfg.lambda_ * np.repeat(C.sum(axis=1)[:, None], C.shape[1], axis=1)
    return G


def _power_norm(matvec, n: int, iters: int = 50, tol: float = 1e-6) -> float:
    """Largest singular value of a symmetric operator by power iteration."""
    if n == 0:
        return 0.0
    rng = np.random.default_rng(1729)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    est = 0.0
    for _ in range(iters):
        w = matvec(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
        if abs(est - prev) <= tol * max(1.0, est):
            break
        prev = est
    return est


def lipschitz_bound(
    C: np.ndarray,
    X_C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> float:
    """Curvature bound on the C-subproblem gradient around the current point.

    Quadratic terms contribute their exact Hessian norms via spectral norms of
    Theta, B and X_C X_C^T; the connectivity term contributes a local bound
    through the inverse of the smallest eigenvalue of the shifted coarse
    Laplacian.  Degenerate inputs yield a conservative large value, never an
    error.
    """
    cache = derived.spectral_cache
    if "theta" not in cache:
        cache["theta"] = _power_norm(lambda v: derived.laplacian @ v, derived.p)
    sigma_theta = cache["theta"]
    G = X_C @ X_C.T
    sigma_xc = _power_norm(lambda v: G @ v, G.shape[0])

    L = 2.0 * sigma_theta * sigma_xc          # smoothness
    L += cfg.alpha * sigma_xc                 # relaxation
    if cfg.beta != 0:
        if "modularity" not in cache:
            cache["modularity"] = _power_norm(
                lambda v: derived.modularity_product(v[:, None]).ravel(), derived.p
            )
        L += (2.0 * cfg.beta / derived.two_e) * cache["modularity"]
    if cfg.gamma > 0:
        k = C.shape[1]
        TC = derived.laplacian @ C
        theta_C = C.T @ TC
        M = (theta_C + theta_C.T) / 2.0 + _ones_shift(k)
        try:
            lam_min = float(sla.eigvalsh(M)[0])
        except sla.LinAlgError:
            lam_min = 0.0
        inv_norm = 1.0 / max(lam_min, 1e-12)
        sigma_c = float(np.sqrt(max(sla.eigvalsh(C.T @ C)[-1], 0.0)))
        # Factor 2 of headroom: lam_min may shrink in a neighborhood of C.
        L += 2.0 * (
            2.0 * cfg.gamma * sigma_theta * inv_norm
            + 4.0 * cfg.gamma * sigma_theta**2 * sigma_c**2 * inv_norm**2
        )
    if cfg.lambda_ > 0:
        L += cfg.lambda_ * C.shape[1]
    return max(L, 1e-12)


def project_feasible(M: np.ndarray) -> np.ndarray:
    """Project each row onto {x >= 0, ||x||_2 <= 1}.

    Negative entries are clipped to zero, then any row with norm above one is
    rescaled onto the unit sphere; feasible rows pass through unchanged.
    """
    P = np.maximum(np.asarray(M, dtype=np.float64), 0.0)
    norms = np.linalg.norm(P, axis=1)
    scale = np.maximum(norms, 1.0)
    return P / scale[:, None]


def _project_global(M: np.ndarray) -> np.ndarray:
    """Clip negatives, then divide the whole matrix by the sum of row norms."""
    P = np.maximum(np.asarray(M, dtype=np.float64), 0.0)
    total = float(np.linalg.norm(P, axis=1).sum())
    if total <= 0:
        return P
    return P / total


def update_C(
    C: np.ndarray,
    X_C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
    f_current: float | None = None,
) -> tuple[np.ndarray, float]:
    """One projected gradient step on C; returns (new C, accepted step bound L).

    With the backtracking policy, L starts at backtracking_shrink times the
    analytic bound and doubles until the quadratic surrogate dominates the
    objective at the candidate point, which is what guarantees descent.
    """
    proj = _project_global if cfg.global_row_normalization else project_feasible
    grad = gradient_C(C, X_C, derived, X, cfg)
    bound = lipschitz_bound(C, X_C, derived, X, cfg)

    if cfg.step_policy == "analytic-bound":
        return proj(C - grad / bound), bound

    if f_current is None:
        f_current = loss(C, X_C, derived, X, cfg).total
    L = bound * cfg.backtracking_shrink
    slack = 1e-10 * (1.0 + abs(f_current))
    candidate = C
    for _ in range(80):
        candidate = proj(C - grad / L)
        delta = candidate - C
        surrogate = (
            f_current
            + float(np.sum(grad * delta))
            + 0.5 * L * float(np.sum(delta * delta))
        )
        try:
            f_cand = loss(candidate, X_C, derived, X, cfg).total
        except SingularCoarseLaplacian:
            L *= 2.0
            continue
        if f_cand <= surrogate + slack:
            return candidate, L
        L *= 2.0
    # Step collapsed to (numerically) no movement; accept the last candidate.
    return candidate, L


def update_XC(
    C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> np.ndarray:
    """Closed-form minimizer of the coarse-feature subproblem.

    Solves ((2/alpha) C^T Theta C + C^T C) X_C = C^T X.  A zero column of C
    (an empty cluster) makes the system singular and raises SingularSystem.
    """
    if cfg.alpha <= 0:
        raise InvalidConfig("coarse-feature update requires alpha > 0")
    col_norms = np.linalg.norm(C, axis=0)
    if np.any(col_norms < _ZERO_COLUMN_TOL):
        empty = np.flatnonzero(col_norms < _ZERO_COLUMN_TOL)
        raise SingularSystem(f"empty cluster column(s) {empty.tolist()}")
    TC = derived.laplacian @ C
    theta_C = C.T @ TC
    A_sys = (2.0 / cfg.alpha) * (theta_C + theta_C.T) / 2.0 + C.T @ C
    rhs = C.T @ X
    try:
        cho = sla.cho_factor(A_sys, lower=True)
        return sla.cho_solve(cho, rhs)
    except sla.LinAlgError as exc:
        raise SingularSystem(f"coarse-feature normal system is singular: {exc}") from exc


def xc_stationarity_residual(
    C: np.ndarray,
    X_C: np.ndarray,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> float:
    """Norm of the coarse-feature subproblem gradient at (C, X_C)."""
    TC = derived.laplacian @ C
    theta_C = C.T @ TC
    theta_C = (theta_C + theta_C.T) / 2.0
    G = 2.0 * theta_C @ X_C + cfg.alpha * (C.T @ (C @ X_C - X))
    return float(np.linalg.norm(G))


def hard_assignments(C: np.ndarray) -> np.ndarray:
    """Per-row argmax labels; ties break toward the lowest column index."""
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[1] < 1:
        raise DimensionMismatch("assignment matrix needs at least one column")
    return np.argmax(C, axis=1).astype(np.int64)


def kkt_residual(
    state: SolverState,
    derived: DerivedMatrices,
    X: np.ndarray,
    cfg: SolverConfig,
) -> float:
    """Projected-gradient stationarity residual at the state's iterate.

    ||C - P(C - grad/L)||_F / ||C||_F, which vanishes exactly at KKT points
    of the constrained subproblem.
    """
    C = state.C
    grad = gradient_C(C, state.X_C, derived, X, cfg)
    L = state.step_L if state.step_L > 0 else lipschitz_bound(C, state.X_C, derived, X, cfg)
    moved = project_feasible(C - grad / L)
    denom = max(float(np.linalg.norm(C)), 1e-30)
    return float(np.linalg.norm(C - moved)) / denom


def init_assignment(
    p: int,
    cfg: SolverConfig,
    rng: np.random.Generator,
    adjacency: sp.spmatrix | None = None,
    degree: np.ndarray | None = None,
) -> np.ndarray:
    """Feasible starting assignment per the configured scheme."""
    k = cfg.k
    if cfg.init == "random-uniform":
        C = rng.uniform(0.0, 1.0, size=(p, k))
        norms = np.maximum(np.linalg.norm(C, axis=1), 1e-12)
        return C / norms[:, None]

    # degree-seeded: the k highest-degree nodes anchor one column each,
    # preferring anchors that are not adjacent to one another.
    if degree is None or adjacency is None:
        raise InvalidConfig("degree-seeded init needs the graph structure")
    order = np.lexsort((np.arange(p), -degree))
    anchors: list[int] = []
    adj = adjacency.tocsr()
    for node in order:
        if len(anchors) == k:
            break
        if any(adj[node, a] != 0 for a in anchors):
            continue
        anchors.append(int(node))
    for node in order:
        if len(anchors) == k:
            break
        if int(node) not in anchors:
            anchors.append(int(node))
    base = 1.0 + 0.01 * rng.uniform(size=(p, k))
    C = base / np.linalg.norm(base, axis=1)[:, None]
    for j, node in enumerate(anchors):
        C[node] = 0.0
        C[node, j] = 1.0
    return C


def _check_dims(C, X_C, derived, X):
    if C.shape[0] != derived.p:
        raise DimensionMismatch(f"C has {C.shape[0]} rows, expected {derived.p}")
    if X.shape[0] != derived.p:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, expected {derived.p}")
    if X_C.shape != (C.shape[1], X.shape[1]):
        raise DimensionMismatch(
            f"X_C shape {X_C.shape} incompatible with C {C.shape} and X {X.shape}"
        )


def _reseed_empty_columns(
    C: np.ndarray,
    X_C: np.ndarray,
    X: np.ndarray,
) -> int:
    """Re-anchor any numerically empty column on the worst-reconstructed node."""
    col_norms = np.linalg.norm(C, axis=0)
    empty = np.flatnonzero(col_norms < _ZERO_COLUMN_TOL)
    if empty.size == 0:
        return 0
    residual = np.linalg.norm(C @ X_C - X, axis=1)
    used: set[int] = set()
    for j in empty:
        order = np.argsort(-residual)
        pick = next(int(i) for i in order if int(i) not in used)
        used.add(pick)
        C[pick] = 0.0
        C[pick, j] = 1.0
        logger.warning("re-seeded empty cluster column %d from node %d", j, pick)
    return int(empty.size)


def solve(
    graph: AttributedGraph,
    cfg: SolverConfig,
    features: np.ndarray | None = None,
    init_C: np.ndarray | None = None,
    derived: DerivedMatrices | None = None,
) -> tuple[SolverState, np.ndarray]:
    """Run the alternating scheme until the loss stalls or max_iters is hit.

    `features` overrides the graph's own feature matrix (use a degree one-hot
    for non-attributed graphs).  Returns the final state, whose loss_trace
    holds one per-term record per iteration, and the hard labels.
    """
    cfg.validate(graph.p)
    X = features if features is not None else graph.features
    if X is None:
        raise MissingFeatures(
            "graph has no features; supply substitute features (e.g. a degree one-hot)"
        )
    X = np.asarray(X, dtype=np.float64)
    if derived is None:
        derived = build_derived(graph)

    rng = np.random.default_rng(cfg.seed)
    if init_C is not None:
        C = project_feasible(np.asarray(init_C, dtype=np.float64))
        if C.shape != (graph.p, cfg.k):
            raise DimensionMismatch(f"init_C shape {C.shape} != {(graph.p, cfg.k)}")
    else:
        C = init_assignment(graph.p, cfg, rng, graph.adjacency, derived.degree)

    reseeded = _reseed_empty_columns(C, np.zeros((cfg.k, X.shape[1])), X)
    if cfg.alpha > 0:
        X_C = update_XC(C, derived, X, cfg)
    else:
        X_C = np.zeros((cfg.k, X.shape[1]))

    trace = [loss(C, X_C, derived, X, cfg)]
    step_L = 0.0
    xc_res_max = 0.0
    converged = False
    t = 0
    for t in range(1, cfg.max_iters + 1):
        C, step_L = update_C(C, X_C, derived, X, cfg, f_current=trace[-1].total)
        reseeded += _reseed_empty_columns(C, X_C, X)
        if cfg.alpha > 0:
            try:
                X_C = update_XC(C, derived, X, cfg)
            except SingularSystem:
                reseeded += _reseed_empty_columns(C, X_C, X)
                X_C = update_XC(C, derived, X, cfg)
            res = xc_stationarity_residual(C, X_C, derived, X, cfg)
            xc_res_max = max(xc_res_max, res / (1.0 + float(np.linalg.norm(C.T @ X))))
        rec = loss(C, X_C, derived, X, cfg)
        if not (np.isfinite(rec.total) and np.all(np.isfinite(C)) and np.all(np.isfinite(X_C))):
            raise NonFinite(f"non-finite iterate at iteration {t}")
        trace.append(rec)
        prev = trace[-2].total
        if abs(rec.total - prev) / max(1.0, abs(prev)) < cfg.rel_tol:
            converged = True
            break

    state = SolverState(
        C=C,
        X_C=X_C,
        t=t,
        loss_trace=trace,
        step_L=step_L,
        converged=converged,
        xc_residual_max=xc_res_max,
        reseeded_columns=reseeded,
    )
    return state, hard_assignments(C)
