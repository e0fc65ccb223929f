"""Replay buffer of representative nodes kept unmerged during coarsening."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

STRATEGIES = ("reservoir", "ring", "mean_features")


class BufferConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    label: int
    features: np.ndarray = field(compare=False)


class ReplayBuffer:
    """Fixed-capacity node buffer.

    ``reservoir`` samples uniformly over every node ever offered. ``ring`` and
    ``mean_features`` reserve ``capacity // num_classes`` slots per class; ring
    keeps the most recent nodes of each class, mean_features the nodes closest
    to the running class mean of all labeled nodes seen so far.
    """

    def __init__(self, capacity: int = 200, strategy: str = "reservoir", num_classes: int = 2, seed: int = 0):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
        if strategy != "reservoir" and num_classes < 1:
            raise ValueError("class-balanced strategies need num_classes >= 1")
        self.capacity = capacity
        self.strategy = strategy
        self.num_classes = num_classes
        self._rng = np.random.default_rng(seed)
        self._seen = 0
        self._reservoir: list[NodeRecord] = []
        per_class = capacity // max(num_classes, 1)
        self.per_class = per_class
        self._queues: dict[int, deque] = {}
        self._kept: dict[int, list[NodeRecord]] = {}
        self._sums: dict[int, np.ndarray] = {}
        self._counts: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def entries(self) -> list[NodeRecord]:
        if self.strategy == "reservoir":
            return list(self._reservoir)
        if self.strategy == "ring":
            return [r for c in sorted(self._queues) for r in self._queues[c]]
        return [r for c in sorted(self._kept) for r in self._kept[c]]

    def node_ids(self) -> list[int]:
        return [r.node_id for r in self.entries]

    def update(self, new_nodes: Iterable[NodeRecord]) -> "ReplayBuffer":
        records = list(new_nodes)
        if records:
            getattr(self, f"_update_{self.strategy}")(records)
        return self

    def _update_reservoir(self, records: list[NodeRecord]) -> None:
        for rec in records:
            if len(self._reservoir) < self.capacity:
                self._reservoir.append(rec)
            else:
                j = int(self._rng.integers(0, self._seen + 1))
                if j < self.capacity:
                    self._reservoir[j] = rec
            self._seen += 1

    def _update_ring(self, records: list[NodeRecord]) -> None:
        for rec in records:
            queue = self._queues.setdefault(rec.label, deque(maxlen=self.per_class))
            if self.per_class:
                queue.append(rec)

    def _update_mean_features(self, records: list[NodeRecord]) -> None:
        by_class: dict[int, list[NodeRecord]] = {}
        for rec in records:
            by_class.setdefault(rec.label, []).append(rec)
            feats = np.asarray(rec.features, dtype=np.float64)
            if rec.label in self._sums:
                self._sums[rec.label] = self._sums[rec.label] + feats
            else:
                self._sums[rec.label] = feats.copy()
            self._counts[rec.label] = self._counts.get(rec.label, 0) + 1
        for label in sorted(set(by_class) | set(self._kept)):
            mean = self._sums[label] / self._counts[label]
            pool = self._kept.get(label, []) + by_class.get(label, [])
            dist = [float(np.linalg.norm(np.asarray(r.features) - mean)) for r in pool]
            order = sorted(range(len(pool)), key=lambda i: dist[i])
            self._kept[label] = [pool[i] for i in order[: self.per_class]]

    def protected_set(self, node_map: Mapping[int, int]) -> set[int]:
        """Current-graph indices of the super-nodes that hold a buffered node."""
        out = set()
        for rec in self.entries:
            if rec.node_id not in node_map:
                raise BufferConsistencyError(f"buffered node {rec.node_id} has no entry in the node map")
            out.add(int(node_map[rec.node_id]))
        return out

    def dump_tsv(self, path) -> None:
        lines = ["node_id\tlabel\tfeatures"]
        for rec in self.entries:
            vec = ",".join(repr(float(x)) for x in np.asarray(rec.features).ravel())
            lines.append(f"{rec.node_id}\t{rec.label}\t{vec}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
