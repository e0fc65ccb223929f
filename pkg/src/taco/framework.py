"""The continual-learning loop: combine, train, coarsen, generate, repeat.

Also hosts the two reference regimes sharing the same backbone and protocol:
``finetune`` (sequential training on each task graph alone) and ``joint``
(retraining from scratch on the union of all tasks so far).
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import gnn
from .coarsen import DEFAULT_EPSILON, Partition, generate_reduced, normalize_partition, repro_coarsen
from .fidelity import NodeRecord, ReplayBuffer
from .graph import UNLABELED, SparseGraph
from .metrics import MetricsMatrix, bacc, macro_f1
from .seeding import derive_seed
from .stream import TaskSplit, TaskSubgraph, split_nodes

log = logging.getLogger(__name__)

MODES = ("taco", "finetune", "joint")


@dataclass
class StreamConfig:
    gamma: float = 0.5
    epsilon: float = DEFAULT_EPSILON
    importance: str = "degree"
    buffer_capacity: int = 200
    buffer_strategy: str = "reservoir"
    hidden: int = 48
    epochs: int = 200
    lr: float = 0.5
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def train_config(self) -> gnn.TrainConfig:
        return gnn.TrainConfig(self.epochs, self.lr, self.weight_decay, self.seed)


@dataclass
class CombinedGraph:
    graph: SparseGraph
    is_super: np.ndarray  # True for nodes inherited from the reduced graph
    new_ids: np.ndarray  # original ids of the appended nodes, in index order

    @property
    def n_super(self) -> int:
        return int(self.is_super.sum())


def combine(
    task: TaskSubgraph,
    reduced: SparseGraph | None,
    node_map: dict[int, int],
    visible_labels=None,
) -> tuple[CombinedGraph, dict[int, int]]:
    """Grow the reduced graph with the task's new nodes and edges.

    Edges between two new nodes are added as is; an edge to an older node is
    redirected to that node's super-node; an edge to an unmapped older node is
    dropped. ``visible_labels`` restricts which new nodes keep their label
    (by default all labeled new nodes do). Returns a new node map.
    """
    n_old = 0 if reduced is None else reduced.n
    new_ids = task.new_ids
    node_map = dict(node_map)
    for k, v in enumerate(new_ids.tolist()):
        node_map[v] = n_old + k
    n = n_old + len(new_ids)
    new_set = set(new_ids.tolist())

    pairs = []
    for s, o in task.edges.tolist():
        if o in new_set:
            pairs.append((node_map[s], node_map[o]))
        elif o in node_map:
            pairs.append((node_map[s], node_map[o]))
        # otherwise the target was never kept: drop the edge

    labels = task.labels.copy()
    if visible_labels is not None:
        keep = np.isin(new_ids, np.asarray(list(visible_labels), dtype=np.int64))
        labels[~keep] = UNLABELED

    if reduced is None:
        feats = task.features
        all_labels = labels
    else:
        feats = np.vstack([reduced.features, task.features])
        all_labels = np.concatenate([reduced.labels, labels])
    g = SparseGraph.from_edges(n, pairs, feats, all_labels)
    if reduced is not None and reduced.adjacency.nnz:
        padded = sp.block_diag([reduced.adjacency, sp.csr_matrix((n - n_old, n - n_old))], format="csr")
        g = SparseGraph(g.adjacency + padded, g.features, g.labels)
    is_super = np.zeros(n, dtype=bool)
    is_super[:n_old] = True
    return CombinedGraph(g, is_super, new_ids.copy()), node_map


def compose_node_map(node_map: dict[int, int], cluster_id: np.ndarray) -> dict[int, int]:
    return {v: int(cluster_id[i]) for v, i in node_map.items()}


def union_graph(tasks: list[TaskSubgraph], visible_labels=None) -> SparseGraph:
    """All nodes introduced by ``tasks`` with every edge among them."""
    ids = np.concatenate([t.new_ids for t in tasks])
    pos = {v: i for i, v in enumerate(ids.tolist())}
    pairs = [(pos[s], pos[o]) for t in tasks for s, o in t.edges.tolist()]
    feats = np.vstack([t.features for t in tasks])
    labels = np.concatenate([t.labels for t in tasks])
    if visible_labels is not None:
        labels = labels.copy()
        labels[~np.isin(ids, np.asarray(list(visible_labels), dtype=np.int64))] = UNLABELED
    return SparseGraph.from_edges(len(ids), pairs, feats, labels)


def _labeled_index(g: SparseGraph) -> np.ndarray:
    return np.flatnonzero(g.labels >= 0)


@dataclass
class TacoState:
    model: gnn.GcnModel
    buffer: ReplayBuffer
    reduced: SparseGraph | None = None
    node_map: dict[int, int] = field(default_factory=dict)
    reduced_sizes: list[int] = field(default_factory=list)
    new_counts: list[int] = field(default_factory=list)
    reached: list[bool] = field(default_factory=list)
    partitions: list[Partition] = field(default_factory=list)
    entry_index: dict[int, tuple[int, int]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=lambda: defaultdict(float))

    @property
    def n_max(self) -> int:
        return max(self.new_counts) if self.new_counts else 0


def size_bound(gamma: float, n_max: int) -> float:
    return (1.0 - gamma) / gamma * n_max


def run_task(state: TacoState, task: TaskSubgraph, split: TaskSplit, cfg: StreamConfig) -> TacoState:
    """Process one task in place and return the state."""
    clock = time.perf_counter
    t0 = clock()
    combined, node_map = combine(task, state.reduced, state.node_map, visible_labels=split.train)
    g = combined.graph
    for k, v in enumerate(combined.new_ids.tolist()):
        state.entry_index[v] = (len(state.partitions), combined.n_super + k)
    t1 = clock()
    gnn.train(state.model, g, _labeled_index(g), cfg.train_config())
    t2 = clock()

    pos = {v: k for k, v in enumerate(task.new_ids.tolist())}
    records = [NodeRecord(v, int(task.labels[pos[v]]), task.features[pos[v]]) for v in split.train.tolist()]
    state.buffer.update(records)
    protected = state.buffer.protected_set(node_map)
    t3 = clock()

    h, _ = gnn.forward(state.model, g)
    part = repro_coarsen(g, h, protected, cfg.gamma, cfg.epsilon, cfg.importance)
    t4 = clock()
    reduced = generate_reduced(g, part, normalize_partition(part))
    state.node_map = compose_node_map(node_map, part.cluster_id)
    t5 = clock()

    state.reduced = reduced
    state.partitions.append(part)
    state.reduced_sizes.append(reduced.n)
    state.new_counts.append(task.num_new)
    state.reached.append(part.reached)
    bound = size_bound(cfg.gamma, state.n_max)
    if reduced.n > bound:
        log.warning(
            "task %d: reduced graph has %d nodes, above the (1-gamma)/gamma * n_max bound %.2f",
            task.t, reduced.n, bound,
        )
    for name, dt in (("combine", t1 - t0), ("train", t2 - t1), ("buffer", t3 - t2),
                     ("coarsen", t4 - t3), ("generate", t5 - t4)):
        state.timings[name] += dt
    return state


@dataclass
class StreamResult:
    mode: str
    metrics: MetricsMatrix
    reduced_sizes: list[int]
    new_counts: list[int]
    reached_target: list[bool]
    timings: dict[str, float]
    config: dict

    def size_trace(self) -> list[dict]:
        gamma = self.config["gamma"]
        out = []
        for i, size in enumerate(self.reduced_sizes):
            bound = size_bound(gamma, max(self.new_counts[: i + 1]))
            out.append({"task": i, "reduced_size": size, "bound": bound, "slack": bound - size})
        return out

    def to_json(self) -> dict:
        report = self.metrics.report()
        report.update(
            {
                "mode": self.mode,
                "reduced_sizes": self.reduced_sizes,
                "new_node_counts": self.new_counts,
                "reached_target": self.reached_target,
                "size_trace": self.size_trace() if self.mode == "taco" else [],
                "timings_sec": dict(self.timings),
                "config": self.config,
                "multi_edges": "accumulated",
            }
        )
        return report


def _evaluate(model, eval_graphs, tasks, splits, metrics: MetricsMatrix, i: int) -> None:
    for j in range(i + 1):
        g = eval_graphs[j]
        pos = {v: k for k, v in enumerate(tasks[j].node_ids.tolist())}
        idx = np.asarray([pos[v] for v in splits[j].test.tolist()], dtype=np.int64)
        if len(idx) == 0:
            raise ValueError(f"task {tasks[j].t} has no labeled test nodes")
        pred = gnn.predict(model, g, idx)
        truth = g.labels[idx]
        metrics.record(i, j, macro_f1(pred, truth), bacc(pred, truth))


def make_splits(tasks: list[TaskSubgraph], seed: int) -> list[TaskSplit]:
    rng = np.random.default_rng(derive_seed(seed, "split"))
    return [split_nodes(t, rng) for t in tasks]


def run_stream(
    tasks: list[TaskSubgraph],
    cfg: StreamConfig,
    mode: str = "taco",
    splits: list[TaskSplit] | None = None,
    num_classes: int | None = None,
) -> StreamResult:
    """Train through the task sequence and fill the lower-triangular metrics matrix."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    if not tasks:
        raise ValueError("need at least one task")
    if splits is None:
        splits = make_splits(tasks, cfg.seed)
    if num_classes is None:
        num_classes = max(int(t.labels.max()) for t in tasks if len(t.labels)) + 1
    num_classes = max(num_classes, 2)
    in_dim = tasks[0].features.shape[1]
    model_seed = derive_seed(cfg.seed, "model")

    def fresh_model() -> gnn.GcnModel:
        return gnn.GcnModel.init(in_dim, num_classes, cfg.hidden, model_seed)

    eval_graphs = [t.to_graph() for t in tasks]
    metrics = MetricsMatrix.empty(len(tasks))
    train_cfg = cfg.train_config()
    timings: dict[str, float] = defaultdict(float)
    new_counts = [t.num_new for t in tasks]
    sizes: list[int] = []
    reached: list[bool] = []

    if mode == "taco":
        buffer = ReplayBuffer(cfg.buffer_capacity, cfg.buffer_strategy, num_classes, derive_seed(cfg.seed, "buffer"))
        state = TacoState(fresh_model(), buffer)
        for i, task in enumerate(tasks):
            run_task(state, task, splits[i], cfg)
            t0 = time.perf_counter()
            _evaluate(state.model, eval_graphs, tasks, splits, metrics, i)
            timings["evaluate"] += time.perf_counter() - t0
        sizes, reached = state.reduced_sizes, state.reached
        for k, v in state.timings.items():
            timings[k] += v
    else:
        model = fresh_model()
        for i, task in enumerate(tasks):
            t0 = time.perf_counter()
            if mode == "finetune":
                g = eval_graphs[i]
                pos = {v: k for k, v in enumerate(task.node_ids.tolist())}
                mask = np.sort([pos[v] for v in splits[i].train.tolist()])
            else:
                model = fresh_model()
                seen = np.concatenate([s.train for s in splits[: i + 1]])
                g = union_graph(tasks[: i + 1], visible_labels=seen)
                mask = _labeled_index(g)
            t1 = time.perf_counter()
            gnn.train(model, g, mask, train_cfg)
            t2 = time.perf_counter()
            _evaluate(model, eval_graphs, tasks, splits, metrics, i)
            timings["combine"] += t1 - t0
            timings["train"] += t2 - t1
            timings["evaluate"] += time.perf_counter() - t2

    return StreamResult(mode, metrics, list(sizes), new_counts, list(reached), dict(timings), asdict(cfg))
