"""Classification scores and continual-learning aggregates (AP, AF, AF-st)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _confusion(pred, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if truth.size == 0:
        raise ValueError("empty input")
    classes = np.unique(truth)
    tp = np.array([np.sum((truth == k) & (pred == k)) for k in classes], dtype=np.float64)
    support = np.array([np.sum(truth == k) for k in classes], dtype=np.float64)
    predicted = np.array([np.sum(pred == k) for k in classes], dtype=np.float64)
    return tp, support, predicted


def macro_f1(pred, truth) -> float:
    """Unweighted mean F1 over the classes present in ``truth``."""
    tp, support, predicted = _confusion(pred, truth)
    denom = support + predicted
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


def bacc(pred, truth) -> float:
    """Balanced accuracy: mean recall over the classes present in ``truth``."""
    tp, support, _ = _confusion(pred, truth)
    return float((tp / support).mean())


@dataclass
class MetricsMatrix:
    """Lower-triangular ``a[i, j]``: score on task j's test set after training task i.

    Missing entries are NaN. Rows and columns are 0-based task positions.
    """

    f1: np.ndarray
    bacc: np.ndarray

    @classmethod
    def empty(cls, num_tasks: int) -> "MetricsMatrix":
        return cls(np.full((num_tasks, num_tasks), np.nan), np.full((num_tasks, num_tasks), np.nan))

    @property
    def num_tasks(self) -> int:
        return self.f1.shape[0]

    def record(self, i: int, j: int, f1: float, bacc_score: float) -> None:
        if j > i:
            raise IndexError(f"cannot score task {j} after training only through task {i}")
        self.f1[i, j] = f1
        self.bacc[i, j] = bacc_score

    def report(self) -> dict:
        f1_ap, f1_af = ap_af(self.f1)
        b_ap, b_af = ap_af(self.bacc)
        out = {
            "f1_ap": f1_ap,
            "f1_af": f1_af,
            "bacc_ap": b_ap,
            "bacc_af": b_af,
            "f1_af_st": af_st(self.f1) if self.num_tasks >= 2 else None,
            "bacc_af_st": af_st(self.bacc) if self.num_tasks >= 2 else None,
            "matrix": _rows(self.f1),
            "bacc_matrix": _rows(self.bacc),
        }
        return out


def _rows(a: np.ndarray) -> list[list[float]]:
    return [[float(a[i, j]) for j in range(i + 1)] for i in range(a.shape[0])]


def _as_matrix(m) -> np.ndarray:
    """Accept a square array or ragged lower-triangular rows."""
    if isinstance(m, MetricsMatrix):
        raise TypeError("pass m.f1 or m.bacc")
    if isinstance(m, np.ndarray):
        a = np.asarray(m, dtype=np.float64)
    else:
        rows = list(m)
        t = len(rows)
        a = np.full((t, t), np.nan)
        for i, row in enumerate(rows):
            if len(row) < i + 1:
                raise ValueError(f"row {i} has {len(row)} entries, needs {i + 1}")
            a[i, : i + 1] = row[: i + 1]
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    lower = np.tril(np.ones_like(a, dtype=bool))
    if np.isnan(a[lower]).any():
        raise ValueError("metrics matrix is incomplete")
    return a


def ap_af(m) -> tuple[float, float]:
    """Average performance after the last task and average forgetting."""
    a = _as_matrix(m)
    t = a.shape[0]
    last = a[t - 1]
    peak = np.array([a[j:, j].max() for j in range(t)])
    return float(last.mean()), float((peak - last).sum() / t)


def af_st(m) -> float:
    """Short-term forgetting: ``(1/T) * sum_{j=2..T} (a[j-1, j-1] - a[j, j-1])``."""
    a = _as_matrix(m)
    t = a.shape[0]
    if t < 2:
        raise ValueError("short-term forgetting needs at least two tasks")
    drops = [a[j - 1, j - 1] - a[j, j - 1] for j in range(1, t)]
    return float(np.sum(drops) / t)
