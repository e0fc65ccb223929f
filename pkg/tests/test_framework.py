import logging

import numpy as np
import pytest

from taco.fidelity import ReplayBuffer
from taco.framework import (
    StreamConfig,
    TacoState,
    combine,
    make_splits,
    run_stream,
    run_task,
    union_graph,
)
from taco.gnn import GcnModel
from taco.graph import SparseGraph
from taco.stream import TaskSplit, TaskSubgraph, split_tasks
from taco.synthetic import SyntheticStreamSpec, generate_synthetic
from taco.theory import check_size_bound


def task(t, new, old, edges, d=2, labels=None):
    ids = np.array(list(new) + list(old), dtype=np.int64)
    is_new = np.array([True] * len(new) + [False] * len(old), dtype=bool)
    labels = np.zeros(len(new), dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    feats = np.arange(len(new) * d, dtype=np.float64).reshape(len(new), d)
    return TaskSubgraph(t, ids, is_new, np.asarray(edges, dtype=np.int64).reshape(-1, 2), feats, labels)


def small_stream(seed=0, tasks=3, nodes=60, **kw):
    spec = SyntheticStreamSpec(tasks=tasks, nodes_per_task=nodes, classes=3, p_in=0.15, p_out=0.02,
                               p_cross=0.01, feature_dim=6, seed=seed, **kw)
    return split_tasks(generate_synthetic(spec))


def fast_cfg(**kw):
    base = dict(epochs=30, hidden=8, buffer_capacity=12)
    base.update(kw)
    return StreamConfig(**base)


def test_first_task_combines_to_its_own_graph():
    t1 = task(1, [10, 11, 12], [], [(11, 10), (12, 10)])
    combined, m = combine(t1, None, {})
    assert m == {10: 0, 11: 1, 12: 2}
    np.testing.assert_array_equal(combined.graph.adjacency.toarray(), t1.to_graph().adjacency.toarray())
    assert not combined.is_super.any()


def test_case_two_redirects_to_super_node():
    reduced = SparseGraph.from_edges(2, [(0, 1)], np.ones((2, 2)), labels=[0, 1])
    t2 = task(2, [20], [5], [(20, 5)])
    combined, m = combine(t2, reduced, {5: 1, 6: 0})
    a = combined.graph.adjacency.toarray()
    assert m[20] == 2
    assert a[2, 1] == a[1, 2] == 1.0
    assert a[0, 1] == 1.0
    assert combined.is_super.tolist() == [True, True, False]
    assert combined.graph.labels.tolist() == [0, 1, 0]


def test_case_three_drops_edge_but_keeps_node():
    reduced = SparseGraph.from_edges(1, [], np.ones((1, 2)))
    t2 = task(2, [20, 21], [99], [(20, 99), (21, 20)])
    combined, m = combine(t2, reduced, {5: 0})
    a = combined.graph.adjacency.toarray()
    assert 99 not in m
    assert a.sum() == 2.0 and a[1, 2] == 1.0
    lone = task(2, [30], [99], [(30, 99)])
    combined, m = combine(lone, reduced, {5: 0})
    assert m[30] == 1 and combined.graph.adjacency.nnz == 0


def test_repeated_edges_accumulate_weight():
    reduced = SparseGraph.from_edges(2, [(0, 1)], np.ones((2, 2)))
    t2 = task(2, [20], [5, 6], [(20, 5), (20, 6)])
    combined, _ = combine(t2, reduced, {5: 1, 6: 1})
    assert combined.graph.adjacency[2, 1] == 2.0


def test_visible_labels_hide_others():
    t1 = task(1, [1, 2, 3], [], [(2, 1)], labels=[0, 1, 1])
    combined, _ = combine(t1, None, {}, visible_labels=[2])
    assert combined.graph.labels.tolist() == [-1, 1, -1]


def test_task_without_new_nodes():
    reduced = SparseGraph.from_edges(2, [(0, 1), (1, 1)], np.ones((2, 2)), labels=[1, 0])
    empty = task(3, [], [], [])
    combined, m = combine(empty, reduced, {4: 0, 5: 1})
    np.testing.assert_array_equal(combined.graph.adjacency.toarray(), reduced.adjacency.toarray())
    assert m == {4: 0, 5: 1}


def run_taco(tasks, cfg):
    splits = make_splits(tasks, cfg.seed)
    state = TacoState(GcnModel.init(tasks[0].features.shape[1], 3, cfg.hidden, 0), ReplayBuffer(cfg.buffer_capacity, num_classes=3))
    history = []
    for tk, sp_ in zip(tasks, splits):
        run_task(state, tk, sp_, cfg)
        history.append(dict(state.node_map))
    return state, history


def test_node_map_closure_and_recomposition():
    tasks = small_stream()
    state, history = run_taco(tasks, fast_cfg())
    seen: set[int] = set()
    for step, (tk, m) in enumerate(zip(tasks, history)):
        seen |= set(tk.new_ids.tolist())
        assert set(m) == seen
        size = state.reduced_sizes[step]
        assert all(0 <= c < size for c in m.values())
    # recompose from the stored per-task partitions
    final = history[-1]
    for v, (first, index) in state.entry_index.items():
        c = int(state.partitions[first].cluster_id[index])
        for part in state.partitions[first + 1 :]:
            c = int(part.cluster_id[c])
        assert c == final[v]
    # buffer nodes stay resolvable and protected ones end up unmerged when the target allows it
    assert state.buffer.protected_set(final) <= set(range(state.reduced.n))


def test_reduced_graph_preserves_total_weight():
    tasks = small_stream(seed=3)
    state, _ = run_taco(tasks[:1], fast_cfg())
    assert state.reduced.adjacency.sum() == tasks[0].to_graph().adjacency.sum()


def test_single_task_modes_agree_bitwise():
    tasks = small_stream(seed=5, tasks=1, nodes=80)
    cfg = fast_cfg(seed=11)
    results = [run_stream(tasks, cfg, mode) for mode in ("taco", "finetune", "joint")]
    values = {(r.metrics.f1[0, 0], r.metrics.bacc[0, 0]) for r in results}
    assert len(values) == 1
    for r in results:
        ap, af = r.metrics.report()["f1_ap"], r.metrics.report()["f1_af"]
        assert ap == r.metrics.f1[0, 0] and af == 0.0


def test_equal_tasks_half_ratio_stay_within_one_task():
    tasks = small_stream(seed=2, tasks=3, nodes=100)
    cfg = fast_cfg(gamma=0.5)
    result = run_stream(tasks, cfg, "taco")
    assert result.new_counts == [100, 100, 100]
    assert result.reduced_sizes[0] == 50
    assert all(result.reached_target)
    report = check_size_bound(result.reduced_sizes, result.new_counts, 0.5)
    assert report.passed and max(result.reduced_sizes) <= 100


def test_size_bound_warning_logged(caplog):
    tasks = small_stream(seed=2, tasks=2, nodes=60)
    with caplog.at_level(logging.WARNING, logger="taco.framework"):
        result = run_stream(tasks, fast_cfg(gamma=0.7), "taco")
    # floor(0.7 * 60) = 42 exceeds 0.3 / 0.7 * 60
    assert result.reduced_sizes[0] == 42
    assert any("bound" in r.getMessage() for r in caplog.records)


def test_evaluation_uses_original_task_graphs():
    tasks = small_stream(seed=4)
    result = run_stream(tasks, fast_cfg(), "taco")
    f1 = result.metrics.f1
    assert np.isfinite(f1[np.tril_indices(3)]).all()
    assert np.isnan(f1[np.triu_indices(3, 1)]).all()
    out = result.to_json()
    assert len(out["size_trace"]) == 3 and out["multi_edges"] == "accumulated"


def test_union_graph_links_tasks():
    t1 = task(1, [1, 2], [], [(2, 1)])
    t2 = task(2, [3], [1], [(3, 1)])
    g = union_graph([t1, t2], visible_labels=[1])
    assert g.n == 3 and g.adjacency[2, 0] == 1.0
    assert g.labels.tolist() == [0, -1, -1]


def test_invalid_mode_and_gamma():
    with pytest.raises(ValueError):
        run_stream(small_stream(tasks=1), fast_cfg(), "replay")
    with pytest.raises(ValueError):
        StreamConfig(gamma=1.0)
    with pytest.raises(ValueError):
        run_stream([], fast_cfg())


def test_run_stream_is_deterministic():
    tasks = small_stream(seed=6, tasks=2)
    a = run_stream(tasks, fast_cfg(seed=3), "taco")
    b = run_stream(tasks, fast_cfg(seed=3), "taco")
    np.testing.assert_array_equal(a.metrics.f1, b.metrics.f1)
    assert a.reduced_sizes == b.reduced_sizes
