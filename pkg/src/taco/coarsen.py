"""Representation-proximity coarsening.

Edges are ranked by cosine similarity of their endpoints' embeddings (minus a
penalty for edges touching protected nodes) and contracted greedily with a
union-find until the node count drops to ``floor(gamma * n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import UNLABELED, SparseGraph, degrees, neighbor_degree_sums

DEFAULT_EPSILON = 2.0
IMPORTANCE_MEASURES = ("degree", "ndsum")


@dataclass(frozen=True)
class EdgeScores:
    """Scores of the undirected edges ``u[k] < v[k]``; ``k`` is the edge id."""

    u: np.ndarray
    v: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return len(self.beta)

    def order(self) -> np.ndarray:
        """Edge ids sorted by descending score, ties by ascending id."""
        return np.lexsort((np.arange(len(self.beta)), -self.beta))


@dataclass(frozen=True)
class Partition:
    cluster_id: np.ndarray  # (n,) compacted ids in 0..n_clusters-1
    n_clusters: int
    importance: np.ndarray  # (n,) strictly positive scores
    target: int
    reached: bool  # False when edges ran out before the target size

    @property
    def n(self) -> int:
        return len(self.cluster_id)

    def membership(self) -> sp.csr_matrix:
        """0/1 node-to-cluster matrix Q of shape (n, n_clusters)."""
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.cluster_id)), shape=(n, self.n_clusters))

    def clusters(self) -> list[np.ndarray]:
        order = np.argsort(self.cluster_id, kind="stable")
        bounds = np.searchsorted(self.cluster_id[order], np.arange(self.n_clusters + 1))
        return [order[bounds[j] : bounds[j + 1]] for j in range(self.n_clusters)]

    @classmethod
    def from_assignment(cls, assignment, importance=None, target: int | None = None) -> "Partition":
        """Compact arbitrary cluster labels; clusters are numbered by their smallest member."""
        assignment = np.asarray(assignment)
        _, first, inverse = np.unique(assignment, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        cluster_id = rank[inverse.ravel()]
        n_clusters = len(first)
        if importance is None:
            importance = np.ones(len(assignment))
        importance = floor_importance(importance)
        if target is None:
            target = n_clusters
        return cls(cluster_id, n_clusters, importance, int(target), n_clusters <= target)


def floor_importance(scores) -> np.ndarray:
    """Replace non-positive scores (isolated nodes) by 1."""
    s = np.asarray(scores, dtype=np.float64).copy()
    s[s <= 0] = 1.0
    return s


def importance_scores(g: SparseGraph, measure: str = "degree") -> np.ndarray:
    if measure == "degree":
        raw = degrees(g)
    elif measure == "ndsum":
        raw = neighbor_degree_sums(g)
    else:
        raise ValueError(f"unknown importance measure {measure!r}; choose from {IMPORTANCE_MEASURES}")
    return floor_importance(raw)


def score_edges(g: SparseGraph, h: np.ndarray, protected=(), epsilon: float = DEFAULT_EPSILON) -> EdgeScores:
    """Cosine similarity of embeddings across every edge, penalized by ``epsilon`` at protected nodes.

    Zero-norm embedding rows give a cosine of 0.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != g.n:
        raise ValueError(f"embedding has {h.shape[0]} rows for {g.n} nodes")
    u, v, _ = g.edge_list()
    norms = np.linalg.norm(h, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = h / safe[:, None]
    unit[norms == 0] = 0.0
    beta = np.einsum("ij,ij->i", unit[u], unit[v])
    if len(protected):
        mask = np.zeros(g.n, dtype=bool)
        mask[np.asarray(list(protected), dtype=np.int64)] = True
        beta = beta - epsilon * (mask[u] | mask[v])
    return EdgeScores(u, v, beta)


def contract(n: int, scores: EdgeScores, target: int) -> tuple[np.ndarray, int, bool]:
    """Greedy union-find contraction in score order until ``target`` clusters remain.

    Returns the root of every node, the live cluster count and whether the
    target was reached.
    """
    parent = list(range(n))
    remaining = n

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    if remaining > target:
        us = scores.u.tolist()
        vs = scores.v.tolist()
        for k in scores.order().tolist():
            ru, rv = find(us[k]), find(vs[k])
            if ru != rv:
                if ru < rv:
                    parent[rv] = ru
                else:
                    parent[ru] = rv
                remaining -= 1
                if remaining <= target:
                    break
    roots = np.fromiter((find(x) for x in range(n)), dtype=np.int64, count=n)
    return roots, remaining, remaining <= target


def repro_coarsen(
    g: SparseGraph,
    h: np.ndarray,
    protected=(),
    gamma: float = 0.5,
    epsilon: float = DEFAULT_EPSILON,
    importance: str = "degree",
) -> Partition:
    """Partition ``g`` into at most ``floor(gamma * n)`` clusters where the edges allow it."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    target = int(np.floor(gamma * g.n))
    scores = score_edges(g, h, protected, epsilon)
    roots, remaining, reached = contract(g.n, scores, target)
    part = Partition.from_assignment(roots, importance_scores(g, importance), target)
    assert part.n_clusters == remaining
    return Partition(part.cluster_id, part.n_clusters, part.importance, target, reached)


def normalize_partition(p: Partition) -> sp.csr_matrix:
    """Importance-weighted contribution matrix with ``P[i, c(i)] = sqrt(s_i / sum of s over c(i))``."""
    s = floor_importance(p.importance)
    totals = np.bincount(p.cluster_id, weights=s, minlength=p.n_clusters)
    vals = np.sqrt(s / totals[p.cluster_id])
    return sp.csr_matrix((vals, (np.arange(p.n), p.cluster_id)), shape=(p.n, p.n_clusters))


def majority_vote(votes: np.ndarray) -> np.ndarray:
    """Row-wise argmax (lowest class on ties); rows without any vote are unlabeled."""
    if votes.shape[1] == 0:
        return np.full(votes.shape[0], UNLABELED, dtype=np.int64)
    labels = np.argmax(votes, axis=1).astype(np.int64)
    labels[~(votes > 0).any(axis=1)] = UNLABELED
    return labels


def generate_reduced(g: SparseGraph, p: Partition, P: sp.csr_matrix | None = None) -> SparseGraph:
    """Super-node graph: adjacency Q^T A Q, features P^T X, labels argmax(P^T Y)."""
    if p.n != g.n:
        raise ValueError(f"partition covers {p.n} nodes, graph has {g.n}")
    if P is None:
        P = normalize_partition(p)
    if P.shape != (g.n, p.n_clusters):
        raise ValueError(f"contribution matrix shape {P.shape} does not match partition")
    q = p.membership()
    adj = sp.csr_matrix(q.T @ g.adjacency @ q)
    feats = np.asarray(P.T @ g.features)
    votes = np.asarray(P.T @ g.one_hot_labels())
    return SparseGraph(adj, feats, majority_vote(votes))
