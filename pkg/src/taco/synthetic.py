"""Synthetic drifting citation-style streams (planted-partition tasks)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import UNLABELED
from .stream import TimestampedGraph

NODE_FILE = "nodes.tsv"
EDGE_FILE = "edges.tsv"


@dataclass
class SyntheticStreamSpec:
    """Stream layout.

    ``mixtures`` is a ``(tasks, classes)`` schedule of class proportions; when
    omitted the mixture moves linearly from ``start_mixture`` to
    ``end_mixture``. Cross-task edges always point from the newer node to the
    older one. ``feature_drift`` shifts every class center by that distance
    per task along a fixed random direction. ``masked_classes`` classes per
    task are written without labels.
    """

    tasks: int = 5
    nodes_per_task: int = 500
    classes: int = 4
    mixtures: np.ndarray | None = None
    start_mixture: tuple | None = None
    end_mixture: tuple | None = None
    p_in: float = 0.02
    p_out: float = 0.002
    p_cross: float = 0.002
    feature_dim: int = 16
    center_scale: float = 1.0
    feature_noise: float = 1.0
    feature_drift: float = 0.0
    masked_classes: int = 0
    seed: int = 0
    mixture_schedule: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("p_in", "p_out", "p_cross"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.tasks < 1 or self.nodes_per_task < 1 or self.classes < 1:
            raise ValueError("tasks, nodes_per_task and classes must be positive")
        if not 0 <= self.masked_classes < self.classes:
            raise ValueError("masked_classes must leave at least one labeled class")
        if self.mixtures is not None:
            sched = np.asarray(self.mixtures, dtype=np.float64)
        else:
            uniform = np.full(self.classes, 1.0 / self.classes)
            start = uniform if self.start_mixture is None else np.asarray(self.start_mixture, dtype=np.float64)
            end = start if self.end_mixture is None else np.asarray(self.end_mixture, dtype=np.float64)
            w = np.linspace(0.0, 1.0, self.tasks)[:, None] if self.tasks > 1 else np.zeros((1, 1))
            sched = (1 - w) * start[None, :] + w * end[None, :]
        if sched.shape != (self.tasks, self.classes):
            raise ValueError(f"mixture schedule must have shape {(self.tasks, self.classes)}, got {sched.shape}")
        if (sched < 0).any():
            raise ValueError("mixture proportions must be non-negative")
        self.mixture_schedule = sched / sched.sum(axis=1, keepdims=True)


def _sample_pairs(rng, same: np.ndarray, p_same: float, p_diff: float) -> np.ndarray:
    prob = np.where(same, p_same, p_diff)
    return rng.random(prob.shape) < prob


def generate_synthetic(spec: SyntheticStreamSpec) -> TimestampedGraph:
    rng = np.random.default_rng(spec.seed)
    c, d, n_t = spec.classes, spec.feature_dim, spec.nodes_per_task
    centers = rng.standard_normal((c, d)) * spec.center_scale
    direction = rng.standard_normal((c, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    ratio = spec.p_out / spec.p_in if spec.p_in > 0 else 0.0

    ids, taus, truth, shown, feats = [], [], [], [], []
    edges: list[np.ndarray] = []
    for t in range(spec.tasks):
        base = t * n_t
        y = rng.choice(c, size=n_t, p=spec.mixture_schedule[t])
        x = centers[y] + t * spec.feature_drift * direction[y] + spec.feature_noise * rng.standard_normal((n_t, d))
        masked = rng.choice(c, size=spec.masked_classes, replace=False) if spec.masked_classes else []
        visible = np.where(np.isin(y, masked), UNLABELED, y)

        same = y[:, None] == y[None, :]
        hit = np.triu(_sample_pairs(rng, same, spec.p_in, spec.p_out), 1)
        lo, hi = np.nonzero(hit)
        edges.append(np.stack([base + hi, base + lo], axis=1))

        if t > 0 and spec.p_cross > 0:
            old_y = np.concatenate(truth)
            same = y[:, None] == old_y[None, :]
            hit = _sample_pairs(rng, same, spec.p_cross, spec.p_cross * ratio)
            src, dst = np.nonzero(hit)
            edges.append(np.stack([base + src, dst], axis=1))

        ids.append(np.arange(base, base + n_t))
        taus.append(np.full(n_t, t + 1))
        truth.append(y)
        shown.append(visible)
        feats.append(x)

    return TimestampedGraph(
        node_ids=np.concatenate(ids).astype(np.int64),
        tau=np.concatenate(taus).astype(np.int64),
        labels=np.concatenate(shown).astype(np.int64),
        features=np.vstack(feats),
        edges=np.concatenate(edges).astype(np.int64).reshape(-1, 2),
    )


def write_dataset(g: TimestampedGraph, out_dir, edge_weights=None) -> tuple[Path, Path]:
    """Write ``nodes.tsv`` and ``edges.tsv`` (optionally with a third weight column)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    node_path, edge_path = out / NODE_FILE, out / EDGE_FILE
    lines = [f"# d_X={g.num_features}"]
    for v, t, y, x in zip(g.node_ids.tolist(), g.tau.tolist(), g.labels.tolist(), g.features):
        label = "-" if y < 0 else str(y)
        lines.append(f"{v}\t{t}\t{label}\t{','.join(repr(float(f)) for f in x)}")
    node_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if edge_weights is None:
        rows = [f"{s}\t{o}" for s, o in g.edges.tolist()]
    else:
        rows = [f"{s}\t{o}\t{w:g}" for (s, o), w in zip(g.edges.tolist(), edge_weights)]
    edge_path.write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")
    return node_path, edge_path
