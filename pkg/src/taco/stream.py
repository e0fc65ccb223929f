"""Loading timestamped graphs and splitting them into the task sequence.

Node file, one node per line (tab separated)::

    node_id  tau  label_or_dash  f_1,f_2,...,f_d

Edge file: ``source_id <TAB> target_id``. Blank lines and lines starting with
``#`` are skipped; a header comment ``# d_X=<int>`` pins the feature width,
otherwise the first node line decides it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import UNLABELED, SparseGraph

_DIM_HEADER = re.compile(r"#\s*d_X\s*=\s*(\d+)")


class DatasetError(ValueError):
    """Malformed or inconsistent dataset file."""

    def __init__(self, path, lineno: int, message: str) -> None:
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class ParseError(DatasetError):
    pass


class ConstraintError(DatasetError):
    pass


@dataclass(frozen=True)
class TimestampedGraph:
    node_ids: np.ndarray  # (n,) int64, file order
    tau: np.ndarray  # (n,) int64
    labels: np.ndarray  # (n,) int64, -1 for unlabeled
    features: np.ndarray  # (n, d_X)
    edges: np.ndarray  # (m, 2) directed (source_id, target_id)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        labeled = self.labels[self.labels >= 0]
        return int(labeled.max()) + 1 if len(labeled) else 0

    def index_of(self) -> dict[int, int]:
        return {int(v): i for i, v in enumerate(self.node_ids)}


@dataclass(frozen=True)
class TaskSubgraph:
    """Subgraph of one time period.

    ``node_ids`` lists the period's own nodes first (file order) followed by
    older edge targets in order of first appearance. Features and labels are
    only given for the period's own nodes.
    """

    t: int
    node_ids: np.ndarray
    is_new: np.ndarray
    edges: np.ndarray  # (m_t, 2) directed ids, all sources new
    features: np.ndarray  # rows for new nodes only
    labels: np.ndarray  # entries for new nodes only

    @property
    def new_ids(self) -> np.ndarray:
        return self.node_ids[self.is_new]

    @property
    def num_new(self) -> int:
        return int(self.is_new.sum())

    def to_graph(self) -> SparseGraph:
        """Undirected view with zero features for old targets, which carry no attributes here."""
        n = len(self.node_ids)
        pos = {int(v): i for i, v in enumerate(self.node_ids)}
        pairs = [(pos[int(s)], pos[int(o)]) for s, o in self.edges]
        d = self.features.shape[1]
        feats = np.zeros((n, d))
        feats[: self.num_new] = self.features
        labels = np.full(n, UNLABELED, dtype=np.int64)
        labels[: self.num_new] = self.labels
        return SparseGraph.from_edges(n, pairs, feats, labels)


@dataclass(frozen=True)
class TaskSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def _iter_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            yield lineno, line


def _parse_int(path, lineno: int, token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(path, lineno, f"invalid {what} {token!r}") from None


def load_dataset(node_path, edge_path) -> TimestampedGraph:
    """Read and validate a node file and an edge file."""
    node_path, edge_path = Path(node_path), Path(edge_path)
    ids: list[int] = []
    taus: list[int] = []
    labels: list[int] = []
    feats: list[list[float]] = []
    dim: int | None = None
    where: dict[int, int] = {}

    for lineno, line in _iter_lines(node_path):
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            m = _DIM_HEADER.match(line.strip())
            if m:
                dim = int(m.group(1))
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(node_path, lineno, f"expected 4 tab-separated fields, got {len(parts)}")
        node_id = _parse_int(node_path, lineno, parts[0], "node id")
        tau = _parse_int(node_path, lineno, parts[1], "time period")
        label = UNLABELED if parts[2].strip() == "-" else _parse_int(node_path, lineno, parts[2], "label")
        if label < UNLABELED:
            raise ParseError(node_path, lineno, f"negative label {label}")
        try:
            vec = [float(x) for x in parts[3].split(",")] if parts[3].strip() else []
        except ValueError:
            raise ParseError(node_path, lineno, "non-numeric feature value") from None
        if dim is None:
            dim = len(vec)
        if len(vec) != dim:
            raise ParseError(node_path, lineno, f"expected {dim} features, got {len(vec)}")
        if node_id in where:
            raise ConstraintError(node_path, lineno, f"duplicate node id {node_id} (first at line {where[node_id]})")
        where[node_id] = lineno
        ids.append(node_id)
        taus.append(tau)
        labels.append(label)
        feats.append(vec)

    tau_of = dict(zip(ids, taus))
    edges: list[tuple[int, int]] = []
    for lineno, line in _iter_lines(edge_path):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(edge_path, lineno, f"expected 2 tab-separated fields, got {len(parts)}")
        s = _parse_int(edge_path, lineno, parts[0], "source id")
        o = _parse_int(edge_path, lineno, parts[1], "target id")
        for end in (s, o):
            if end not in tau_of:
                raise ConstraintError(edge_path, lineno, f"unknown node {end}")
        if s == o:
            raise ConstraintError(edge_path, lineno, f"self-loop on node {s}")
        if tau_of[o] > tau_of[s]:
            raise ConstraintError(
                edge_path, lineno, f"target {o} (tau={tau_of[o]}) is newer than source {s} (tau={tau_of[s]})"
            )
        edges.append((s, o))

    return TimestampedGraph(
        node_ids=np.asarray(ids, dtype=np.int64),
        tau=np.asarray(taus, dtype=np.int64),
        labels=np.asarray(labels, dtype=np.int64),
        features=np.asarray(feats, dtype=np.float64).reshape(len(ids), dim or 0),
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
    )


def split_tasks(g: TimestampedGraph) -> list[TaskSubgraph]:
    """One subgraph per distinct time period, ascending.

    An edge belongs to the period of its source; a node belongs to its own
    period and to every period whose edges point at it.
    """
    if g.n == 0:
        raise ValueError("graph has no nodes")
    tau_of = dict(zip(g.node_ids.tolist(), g.tau.tolist()))
    edge_tau = np.array([tau_of[s] for s in g.edges[:, 0].tolist()], dtype=np.int64)
    tasks = []
    for t in np.unique(g.tau).tolist():
        own = np.flatnonzero(g.tau == t)
        own_ids = g.node_ids[own]
        edges = g.edges[edge_tau == t]
        seen = set(own_ids.tolist())
        old: list[int] = []
        for o in edges[:, 1].tolist():
            if o not in seen:
                seen.add(o)
                old.append(o)
        node_ids = np.concatenate([own_ids, np.asarray(old, dtype=np.int64)])
        is_new = np.zeros(len(node_ids), dtype=bool)
        is_new[: len(own)] = True
        tasks.append(
            TaskSubgraph(
                t=int(t),
                node_ids=node_ids,
                is_new=is_new,
                edges=edges.copy(),
                features=g.features[own].copy(),
                labels=g.labels[own].copy(),
            )
        )
    return tasks


def split_nodes(task: TaskSubgraph, rng: np.random.Generator, ratios=(0.3, 0.2, 0.5)) -> TaskSplit:
    """Random train/val/test split over the task's labeled new nodes."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three fractions summing to 1, got {ratios}")
    labeled = task.new_ids[task.labels >= 0]
    perm = rng.permutation(labeled)
    n_train = int(round(ratios[0] * len(perm)))
    n_val = int(round(ratios[1] * len(perm)))
    return TaskSplit(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train : n_train + n_val]),
        test=np.sort(perm[n_train + n_val :]),
    )
