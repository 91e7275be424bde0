"""Plain-text dataset loading, feature substitution and canonical export.

On-disk formats are deliberately dependency-free: an edge list with "#"
comments and whitespace/comma separation, a numeric CSV for features, and
one integer per line for labels.  Canonical export writes sorted edges with
"%.12g" weights so identical graphs serialize to identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NegativeWeight, ParseError, SelfLoop
from .graph import AttributedGraph


@dataclass(frozen=True)
class DatasetBundle:
    """A loaded graph plus provenance of the files it came from."""

    graph: AttributedGraph
    name: str
    source_paths: dict[str, str] = field(default_factory=dict)
    node_names: list[str] | None = None


def load_edge_list(path: str | Path) -> tuple[sp.csr_matrix, list[str] | None]:
    """Parse an undirected edge list into a symmetric adjacency.

    Each non-comment line is "u v" or "u v w"; duplicate edges sum their
    weights; every line contributes both directions once.  Integer ids are
    used as-is (0-based); any non-integer id switches the whole file to
    string mode, with ids mapped densely in first-seen order.  Returns the
    adjacency and the id list (None when ids were already dense integers).
    """
    path = Path(path)
    rows: list[tuple[str, str, float, int]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            tokens = body.replace(",", " ").split()
            if len(tokens) not in (2, 3):
                raise ParseError(f"{path.name}:{lineno}: expected 'u v [w]', got {body!r}")
            w = 1.0
            if len(tokens) == 3:
                try:
                    w = float(tokens[2])
                except ValueError as exc:
                    raise ParseError(f"{path.name}:{lineno}: bad weight {tokens[2]!r}") from exc
            if not np.isfinite(w):
                raise ParseError(f"{path.name}:{lineno}: non-finite weight")
            if w < 0:
                raise NegativeWeight(f"{path.name}:{lineno}: negative weight {w}")
            if tokens[0] == tokens[1]:
                raise SelfLoop(f"{path.name}:{lineno}: self-loop on {tokens[0]!r}")
            rows.append((tokens[0], tokens[1], w, lineno))

    integer_ids = all(u.isdigit() and v.isdigit() for u, v, _, _ in rows)
    names: list[str] | None = None
    if integer_ids:
        ids = {tok: int(tok) for r in rows for tok in (r[0], r[1])}
    else:
        names = []
        ids = {}
        for u, v, _, _ in rows:
            for tok in (u, v):
                if tok not in ids:
                    ids[tok] = len(names)
                    names.append(tok)
    p = (max(ids.values()) + 1) if ids else 0

    acc: dict[tuple[int, int], float] = {}
    for u, v, w, lineno in rows:
        i, j = ids[u], ids[v]
        if i == j:
            raise SelfLoop(f"{path.name}:{lineno}: self-loop on node {i}")
        key = (min(i, j), max(i, j))
        acc[key] = acc.get(key, 0.0) + w
    if acc:
        iu = np.fromiter((k[0] for k in acc), dtype=np.int64, count=len(acc))
        ju = np.fromiter((k[1] for k in acc), dtype=np.int64, count=len(acc))
        wu = np.fromiter(acc.values(), dtype=np.float64, count=len(acc))
        A = sp.coo_matrix(
            (np.concatenate([wu, wu]), (np.concatenate([iu, ju]), np.concatenate([ju, iu]))),
            shape=(p, p),
        ).tocsr()
    else:
        A = sp.csr_matrix((p, p))
    return A, names


def load_features_csv(path: str | Path) -> np.ndarray:
    """Dense float matrix from a numeric CSV; a non-numeric first row is a header."""
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body:
                continue
            tokens = [t.strip() for t in body.split(",")]
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"{path.name}:{lineno}: non-numeric value") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    f"{path.name}:{lineno}: expected {width} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path.name}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def load_labels(path: str | Path) -> np.ndarray:
    """Integer label vector, one value per line."""
    path = Path(path)
    out: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                out.append(int(body))
            except ValueError as exc:
                raise ParseError(f"{path.name}:{lineno}: bad label {body!r}") from exc
    return np.asarray(out, dtype=np.int64)


def degree_onehot(graph: AttributedGraph) -> np.ndarray:
    """One-hot encoding of the degree vector, for non-attributed graphs.

    Columns correspond to the distinct degree values in ascending order; each
    row has a single one in its degree's column.
    """
    d = np.asarray(graph.adjacency.sum(axis=1)).ravel()
    values, inverse = np.unique(d, return_inverse=True)
    X = np.zeros((graph.p, values.size))
    X[np.arange(graph.p), inverse] = 1.0
    return X


def load_bundle(
    edges: str | Path,
    features: str | Path | None = None,
    labels: str | Path | None = None,
    name: str = "dataset",
) -> DatasetBundle:
    """Assemble a graph from files, validating cross-file dimensions."""
    adjacency, names = load_edge_list(edges)
    p = adjacency.shape[0]
    X = None
    if features is not None:
        X = load_features_csv(features)
        if X.shape[0] != p:
            raise DimensionMismatch(f"{X.shape[0]} feature rows for {p} nodes")
    y = None
    if labels is not None:
        y = load_labels(labels)
        if y.shape[0] != p:
            raise DimensionMismatch(f"{y.shape[0]} labels for {p} nodes")
    graph = AttributedGraph(adjacency=adjacency, features=X, labels=y)
    paths = {"edges": str(edges)}
    if features is not None:
        paths["features"] = str(features)
    if labels is not None:
        paths["labels"] = str(labels)
    return DatasetBundle(graph=graph, name=name, source_paths=paths, node_names=names)


def save_edge_list(path: str | Path, adjacency: sp.spmatrix) -> None:
    """Canonical export: one "i j w" line per undirected edge, sorted, %.12g weights."""
    coo = sp.triu(adjacency.tocoo(), k=1)
    order = np.lexsort((coo.col, coo.row))
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, j, w in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {w:.12g}\n")


def save_features_csv(path: str | Path, X: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in np.asarray(X):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def save_labels(path: str | Path, labels: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for v in np.asarray(labels, dtype=np.int64):
            fh.write(f"{v}\n")


def save_node_names(path: str | Path, names: list[str]) -> None:
    """Emit the string-id-to-dense-index mapping next to results."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for idx, name in enumerate(names):
            fh.write(f"{idx} {name}\n")
