"""Numerical probes of the vanishing-minority effect, twin-node merges and the memory size bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .graph import SparseGraph

_CHUNK_ELEMENTS = 2_000_000


@dataclass
class VoteSimConfig:
    """Random-partition majority-vote experiment.

    ``b`` nodes are held out as singleton clusters (``b = 0`` disables the
    protection); the other ``floor(gamma * n) - b`` clusters get one seed
    node each and the remaining nodes are dropped into them uniformly.
    """

    n: int
    c: int
    p: np.ndarray
    gamma: float
    b: int = 0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.shape != (self.c,):
            raise ValueError(f"class distribution must have {self.c} entries")
        if (self.p < 0).any() or abs(self.p.sum() - 1.0) > 1e-12:
            raise ValueError("class distribution must be non-negative and sum to 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.n_clusters < 1:
            raise ValueError("floor(gamma * n) must be at least 1")
        if not 0 <= self.b < self.n_clusters:
            raise ValueError(f"b must lie in [0, {self.n_clusters})")
        if self.trials < 2:
            raise ValueError("need at least two trials for a standard error")

    @property
    def n_clusters(self) -> int:
        return int(np.floor(self.gamma * self.n))


@dataclass
class VoteEstimate:
    mean: np.ndarray  # estimated class shares among clusters
    stderr: np.ndarray
    trials: int
    n_clusters: int
    per_trial: np.ndarray = field(repr=False)  # (trials, c)


def _assign(n: int, n_clusters: int, b: int, rng: np.random.Generator, batch: int) -> np.ndarray:
    """Cluster index of every node for ``batch`` independent trials."""
    seeds = np.broadcast_to(np.arange(n_clusters), (batch, n_clusters))
    surplus = rng.integers(b, n_clusters, size=(batch, n - n_clusters)) if n_clusters > b else \
        np.empty((batch, n - n_clusters), dtype=np.int64)
    return np.concatenate([seeds, surplus], axis=1)


def simulate_partition_vote(cfg: VoteSimConfig) -> VoteEstimate:
    """Monte Carlo estimate of the class shares after random clustering and majority voting.

    Node labels are drawn i.i.d. from ``cfg.p``; ties in a cluster's vote are
    broken uniformly at random among the tied classes.
    """
    rng = np.random.default_rng(cfg.seed)
    n, c, k = cfg.n, cfg.c, cfg.n_clusters
    cum = np.cumsum(cfg.p)
    cum[-1] = 1.0
    batch = max(1, _CHUNK_ELEMENTS // max(n, k * c))
    shares = np.empty((cfg.trials, c))
    done = 0
    while done < cfg.trials:
        m = min(batch, cfg.trials - done)
        labels = np.searchsorted(cum, rng.random((m, n)), side="right")
        labels = np.minimum(labels, c - 1)
        cluster = _assign(n, k, cfg.b, rng, m)
        flat = (np.arange(m)[:, None] * k + cluster) * c + labels
        counts = np.bincount(flat.ravel(), minlength=m * k * c).reshape(m, k, c).astype(np.float64)
        # jitter below 1 only reorders classes with equal integer counts
        winner = np.argmax(counts + rng.uniform(0.0, 0.5, size=counts.shape), axis=2)
        won = np.zeros((m, c))
        np.add.at(won, (np.repeat(np.arange(m), k), winner.ravel()), 1.0)
        shares[done : done + m] = won / k
        done += m
    return VoteEstimate(
        mean=shares.mean(axis=0),
        stderr=shares.std(axis=0, ddof=1) / np.sqrt(cfg.trials),
        trials=cfg.trials,
        n_clusters=k,
        per_trial=shares,
    )


def simulate_cluster_sizes(n: int, gamma: float, trials: int, seed: int = 0) -> np.ndarray:
    """Sizes of cluster 0 over independent random partitions (same law as every cluster)."""
    rng = np.random.default_rng(seed)
    k = int(np.floor(gamma * n))
    assignment = _assign(n, k, 0, rng, trials)
    return (assignment == 0).sum(axis=1)


def cluster_size_pmf(n: int, n_clusters: int, sizes) -> np.ndarray:
    """Probability that a given cluster holds ``a`` nodes: one seed plus Binomial(n - n', 1/n')."""
    sizes = np.asarray(sizes)
    return binom.pmf(sizes - 1, n - n_clusters, 1.0 / n_clusters)


class PreconditionError(ValueError):
    def __init__(self, i: int, j: int, column: int) -> None:
        super().__init__(f"rows {i} and {j} of A + I differ at column {column}")
        self.column = column


def twin_columns(adjacency: np.ndarray, i: int, j: int) -> np.ndarray:
    """Columns where rows i and j of A + I differ."""
    a_tilde = adjacency + np.eye(adjacency.shape[0])
    return np.flatnonzero(np.abs(a_tilde[i] - a_tilde[j]) > 0)


def merge_operator(n: int, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Averaging operator for merging nodes i and j, and its pseudo-inverse in closed form.

    ``P`` is ``(n-1, n)`` with entries 1/2 on the merged row; ``P^+`` copies
    the merged value back to both nodes.
    """
    lo, hi = min(i, j), max(i, j)
    cols = [k for k in range(n) if k != hi]
    P = np.zeros((n - 1, n))
    P_plus = np.zeros((n, n - 1))
    for r, k in enumerate(cols):
        if k == lo:
            P[r, lo] = P[r, hi] = 0.5
            P_plus[lo, r] = P_plus[hi, r] = 1.0
        else:
            P[r, k] = 1.0
            P_plus[k, r] = 1.0
    return P, P_plus


def _operator_matrix(adjacency: np.ndarray, operator: str) -> np.ndarray:
    n = adjacency.shape[0]
    if operator == "laplacian":
        return np.diag(adjacency.sum(axis=1)) - adjacency
    a_tilde = adjacency + np.eye(n)
    if operator == "augmented":
        return a_tilde
    if operator == "normalized":
        d = 1.0 / np.sqrt(a_tilde.sum(axis=1))
        return d[:, None] * a_tilde * d[None, :]
    raise ValueError(f"unknown operator {operator!r}")


def check_laplacian_equivalence(
    g: SparseGraph,
    i: int,
    j: int,
    num_vectors: int = 100,
    seed: int = 0,
    operator: str = "laplacian",
    require_twins: bool = True,
) -> float:
    """Largest ``|x'^T L' x' - x^T L x|`` over random Gaussian ``x`` for the merge of i and j.

    ``L' = (P^+)^T L P^+`` and ``x' = P x``. ``operator`` picks ``L``: the
    combinatorial Laplacian ``D - A`` (default), ``A + I`` ("augmented") or
    its symmetric normalization ("normalized").
    """
    if i == j:
        raise ValueError("need two distinct nodes")
    adjacency = g.adjacency.toarray()
    diff = twin_columns(adjacency, i, j)
    if require_twins and len(diff):
        raise PreconditionError(i, j, int(diff[0]))
    L = _operator_matrix(adjacency, operator)
    P, P_plus = merge_operator(g.n, i, j)
    L_red = P_plus.T @ L @ P_plus
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((num_vectors, g.n))
    xr = x @ P.T
    full = np.einsum("ki,ij,kj->k", x, L, x)
    reduced = np.einsum("ki,ij,kj->k", xr, L_red, xr)
    return float(np.max(np.abs(reduced - full))) if num_vectors else 0.0


def random_twin_graph(n: int, density: float, rng: np.random.Generator) -> tuple[SparseGraph, int, int]:
    """Random graph with a designated adjacent pair whose rows of A + I coincide."""
    a = np.triu((rng.random((n, n)) < density).astype(np.float64), 1)
    a = a + a.T
    i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
    a[j, :] = a[i, :]
    a[:, j] = a[:, i]
    a[i, j] = a[j, i] = 1.0
    a[i, i] = a[j, j] = 0.0
    return SparseGraph.from_edges(n, np.argwhere(np.triu(a, 1) > 0)), i, j


def random_nontwin_pair(n: int, density: float, rng: np.random.Generator) -> tuple[SparseGraph, int, int]:
    """Random graph plus a pair whose rows of A + I differ.

    Pairs of two isolated nodes are skipped: merging them leaves ``D - A``
    quadratic forms unchanged, so they cannot expose a broken check.
    """
    while True:
        a = np.triu((rng.random((n, n)) < density).astype(np.float64), 1)
        a = a + a.T
        i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
        if len(twin_columns(a, i, j)) and (a[i].any() or a[j].any()):
            return SparseGraph.from_edges(n, np.argwhere(np.triu(a, 1) > 0)), i, j


@dataclass
class SizeBoundReport:
    passed: bool
    min_slack: float
    bounds: list[float]
    violations: list[int]  # 0-based task positions


def check_size_bound(reduced_sizes, new_counts, gamma: float, factor: float | None = None) -> SizeBoundReport:
    """Check ``reduced_size[t] <= factor * max(new_counts[:t+1])`` after every task.

    ``factor`` defaults to ``(1 - gamma) / gamma``.
    """
    if len(reduced_sizes) != len(new_counts):
        raise ValueError("size trace and new-node counts differ in length")
    if factor is None:
        factor = (1.0 - gamma) / gamma
    bounds, slack, violations = [], [], []
    n_max = 0
    for t, (size, count) in enumerate(zip(reduced_sizes, new_counts)):
        n_max = max(n_max, count)
        bound = factor * n_max
        bounds.append(bound)
        slack.append(bound - size)
        if size > bound:
            violations.append(t)
    return SizeBoundReport(not violations, float(min(slack)) if slack else float("inf"), bounds, violations)
