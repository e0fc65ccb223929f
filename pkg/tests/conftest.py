from __future__ import annotations

import numpy as np
import pytest

from taco.graph import SparseGraph


def path_graph(n: int) -> SparseGraph:
    return SparseGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], np.eye(n))


def triangle() -> SparseGraph:
    return SparseGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], np.eye(3))


def star(leaves: int) -> SparseGraph:
    return SparseGraph.from_edges(leaves + 1, [(0, k) for k in range(1, leaves + 1)], np.ones((leaves + 1, 1)))


def random_graph(rng: np.random.Generator, n: int, density: float, d: int = 3, classes: int = 2) -> SparseGraph:
    upper = np.triu(rng.random((n, n)) < density, 1)
    feats = rng.standard_normal((n, d))
    labels = rng.integers(0, classes, size=n)
    return SparseGraph.from_edges(n, np.argwhere(upper), feats, labels)


def write_files(tmp_path, node_lines, edge_lines):
    nodes = tmp_path / "nodes.tsv"
    edges = tmp_path / "edges.tsv"
    nodes.write_text("\n".join(node_lines) + "\n", encoding="utf-8")
    edges.write_text("\n".join(edge_lines) + ("\n" if edge_lines else ""), encoding="utf-8")
    return nodes, edges


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
