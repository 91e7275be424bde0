"""Clustering evaluation: label-alignment scores and graph-quality scores.

Label metrics (NMI, ARI, matched accuracy) compare two labelings through
their contingency table and are invariant to permutations of cluster ids.
Graph metrics (modularity, mean conductance) score a partition against the
graph itself and need no ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EmptyGraph, LengthMismatch, ZeroVolumeCluster
from .graph import AttributedGraph


@dataclass(frozen=True)
class Evaluation:
    """Bundle of all five scores plus the contingency table."""

    nmi: float
    ari: float
    acc: float
    modularity: float
    conductance: float
    contingency: np.ndarray

    def as_dict(self) -> dict:
        return {
            "nmi": self.nmi,
            "ari": self.ari,
            "acc": self.acc,
            "modularity": self.modularity,
            "conductance": self.conductance,
        }


def _as_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise LengthMismatch("labels must be 1-D")
    return y


def contingency_table(y_true, y_pred) -> np.ndarray:
    """Count matrix N[a, b] = |{i : y_true_i = a, y_pred_i = b}|."""
    y_true, y_pred = _as_labels(y_true), _as_labels(y_pred)
    if y_true.shape[0] != y_pred.shape[0]:
        raise LengthMismatch(f"{y_true.shape[0]} vs {y_pred.shape[0]} labels")
    _, ti = np.unique(y_true, return_inverse=True)
    _, pi = np.unique(y_pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(y_true, y_pred) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies.

    Conventions: 1.0 for labelings identical up to permutation (including two
    constant labelings), 0.0 when exactly one labeling has zero entropy.
    """
    table = contingency_table(y_true, y_pred)
    n = table.sum()
    h_true = _entropy(table.sum(axis=1))
    h_pred = _entropy(table.sum(axis=0))
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    pij = table / n
    pi = table.sum(axis=1) / n
    pj = table.sum(axis=0) / n
    mask = pij > 0
    mi = float((pij[mask] * np.log(pij[mask] / np.outer(pi, pj)[mask])).sum())
    return min(max(mi / (0.5 * (h_true + h_pred)), 0.0), 1.0)


def ari(y_true, y_pred) -> float:
    """Adjusted Rand index: pair-counting agreement corrected for chance."""
    table = contingency_table(y_true, y_pred)
    n = table.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_a = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # Both partitions trivial (all singletons or a single cluster).
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def accuracy(y_true, y_pred) -> float:
    """Fraction matched under the best injective cluster-to-class assignment."""
    table = contingency_table(y_true, y_pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / float(table.sum())


def _cluster_volumes(graph: AttributedGraph, labels: np.ndarray):
    """Per-cluster (internal weight, volume) pairs plus the degree data."""
    A = graph.adjacency
    d = np.asarray(A.sum(axis=1)).ravel()
    two_e = float(d.sum())
    if two_e <= 0:
        raise EmptyGraph("graph has no edges")
    ids = np.unique(labels)
    internal = np.empty(ids.size)
    volume = np.empty(ids.size)
    for n_c, c in enumerate(ids):
        members = labels == c
        sub = A[members][:, members]
        internal[n_c] = float(sub.sum())
        volume[n_c] = float(d[members].sum())
    return ids, internal, volume, two_e


def modularity_score(graph: AttributedGraph, labels) -> float:
    """Modularity of a partition: intra-cluster weight minus its null expectation.

    Computed in the trace form over the one-hot assignment; agrees with the
    pairwise definition (see modularity_score_pairwise).
    """
    labels = _check_labels_cover(graph, labels)
    _, internal, volume, two_e = _cluster_volumes(graph, labels)
    return float(((internal - volume**2 / two_e) / two_e).sum())


def modularity_score_pairwise(graph: AttributedGraph, labels) -> float:
    """Pairwise double-loop form of modularity; cross-check twin of modularity_score."""
    labels = _check_labels_cover(graph, labels)
    A = graph.adjacency.toarray()
    d = A.sum(axis=1)
    two_e = float(d.sum())
    if two_e <= 0:
        raise EmptyGraph("graph has no edges")
    q = 0.0
    p = graph.p
    for i in range(p):
        for j in range(p):
            if labels[i] == labels[j]:
                q += A[i, j] - d[i] * d[j] / two_e
    return q / two_e


def conductance(graph: AttributedGraph, labels) -> float:
    """Mean over clusters of cut weight over the smaller side's volume; lower is better."""
    labels = _check_labels_cover(graph, labels)
    ids, internal, volume, two_e = _cluster_volumes(graph, labels)
    values = []
    for c, a_c, vol_c in zip(ids, internal, volume):
        denom = min(vol_c, two_e - vol_c)
        if denom <= 0:
            raise ZeroVolumeCluster(
                f"cluster {c} or its complement has zero volume; conductance undefined"
            )
        values.append((vol_c - a_c) / denom)
    return float(np.mean(values))


def evaluate(graph: AttributedGraph, y_true, y_pred) -> Evaluation:
    """All five scores for a prediction against ground truth on a graph."""
    table = contingency_table(y_true, y_pred)
    return Evaluation(
        nmi=nmi(y_true, y_pred),
        ari=ari(y_true, y_pred),
        acc=accuracy(y_true, y_pred),
        modularity=modularity_score(graph, y_pred),
        conductance=conductance(graph, y_pred),
        contingency=table,
    )


def _check_labels_cover(graph: AttributedGraph, labels) -> np.ndarray:
    labels = _as_labels(labels)
    if labels.shape[0] != graph.p:
        raise LengthMismatch(f"{labels.shape[0]} labels for {graph.p} nodes")
    return labels
