"""Weighted undirected graphs backed by scipy CSR storage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

UNLABELED = -1


@dataclass(frozen=True)
class SparseGraph:
    """Symmetric, non-negatively weighted graph with node features and labels.

    Labels use ``UNLABELED`` (-1) for nodes without a class. Self-loops are
    allowed; coarsened graphs carry them on the diagonal.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        adj = sp.csr_matrix(self.adjacency, dtype=np.float64)
        adj.eliminate_zeros()
        adj.sort_indices()
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError(f"adjacency must be square, got {adj.shape}")
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("adjacency weights must be non-negative")
        if n and abs(adj - adj.T).max() > 1e-12:
            raise ValueError("adjacency must be symmetric")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise ValueError(f"features must have {n} rows, got shape {feats.shape}")
        labels = self.labels
        labels = np.full(n, UNLABELED, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"labels must have length {n}")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        features: np.ndarray | None = None,
        labels=None,
        weights=None,
    ) -> "SparseGraph":
        """Build a graph from undirected ``(u, v)`` pairs; repeated pairs add up."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=np.float64)
        u, v = edges[:, 0], edges[:, 1]
        loops = u == v
        # a self-loop (u, u) contributes its weight once on the diagonal
        rows = np.concatenate([u, v[~loops]])
        cols = np.concatenate([v, u[~loops]])
        data = np.concatenate([w, w[~loops]])
        adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        adj.sum_duplicates()
        if features is None:
            features = np.zeros((n, 0))
        return cls(adj, features, labels)

    def edge_list(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges ``u < v`` in row-major order, excluding self-loops."""
        upper = sp.triu(self.adjacency, k=1, format="coo")
        order = np.lexsort((upper.col, upper.row))
        return upper.row[order].astype(np.int64), upper.col[order].astype(np.int64), upper.data[order]

    def one_hot_labels(self, num_classes: int | None = None) -> np.ndarray:
        """One-hot label matrix; unlabeled rows are all zero."""
        labeled = self.labels >= 0
        if num_classes is None:
            num_classes = int(self.labels.max()) + 1 if labeled.any() else 0
        y = np.zeros((self.n, num_classes))
        y[np.flatnonzero(labeled), self.labels[labeled]] = 1.0
        return y


def _check_node(g: SparseGraph, v: int) -> None:
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} out of range for graph with {g.n} nodes")


def degrees(g: SparseGraph) -> np.ndarray:
    """Weighted degree of every node (row sums of the adjacency)."""
    return np.asarray(g.adjacency.sum(axis=1)).ravel()


def neighbor_degree_sums(g: SparseGraph) -> np.ndarray:
    """For every node, the summed degree of its distinct 1-hop neighbors."""
    pattern = g.adjacency.copy()
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    pattern.data[:] = 1.0
    return pattern @ degrees(g)


def degree(g: SparseGraph, v: int) -> float:
    _check_node(g, v)
    row = g.adjacency.getrow(v)
    return float(row.sum())


def neighbor_degree_sum(g: SparseGraph, v: int) -> float:
    _check_node(g, v)
    return float(neighbor_degree_sums(g)[v])


def normalized_adjacency(g: SparseGraph) -> sp.csr_matrix:
    """GCN propagation operator ``D^-1/2 (A + I) D^-1/2`` with D the degrees of A + I."""
    a_tilde = sp.csr_matrix(g.adjacency + sp.identity(g.n, format="csr"))
    d = np.asarray(a_tilde.sum(axis=1)).ravel()
    coo = a_tilde.tocoo()
    data = coo.data / np.sqrt(d[coo.row] * d[coo.col])
    return sp.csr_matrix((data, (coo.row, coo.col)), shape=a_tilde.shape)
