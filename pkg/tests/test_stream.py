import numpy as np
import pytest

from taco.stream import ConstraintError, ParseError, load_dataset, split_nodes, split_tasks

from conftest import write_files


def node(v, t, label="0", feats="0.0,1.0"):
    return f"{v}\t{t}\t{label}\t{feats}"


def test_minimal_dataset(tmp_path):
    g = load_dataset(*write_files(tmp_path, [node(1, 1), node(2, 1)], ["2\t1"]))
    assert g.n == 2
    assert g.edges.tolist() == [[2, 1]]
    assert g.node_ids.tolist() == [1, 2]
    assert g.num_features == 2


def test_target_newer_than_source_rejected(tmp_path):
    with pytest.raises(ConstraintError) as err:
        load_dataset(*write_files(tmp_path, [node(1, 1), node(2, 2)], ["1\t2"]))
    assert err.value.lineno == 1
    assert "newer" in str(err.value)


def test_feature_arity_mismatch_reports_line(tmp_path):
    lines = ["# d_X=4", node(1, 1, feats="1,2,3,4"), node(2, 1, feats="1,2,3")]
    with pytest.raises(ParseError) as err:
        load_dataset(*write_files(tmp_path, lines, []))
    assert err.value.lineno == 3


def test_arity_inferred_from_first_line(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(*write_files(tmp_path, [node(1, 1, feats="1,2"), node(2, 1, feats="1")], []))
    assert err.value.lineno == 2


@pytest.mark.parametrize(
    "nodes, edges, exc, lineno",
    [
        ([node(1, 1), "2\t1\t0"], [], ParseError, 2),
        ([node(1, 1), node("x", 1)], [], ParseError, 2),
        ([node(1, 1), node(1, 1)], [], ConstraintError, 2),
        ([node(1, 1, label="a")], [], ParseError, 1),
        ([node(1, 1)], ["1\t9"], ConstraintError, 1),
        ([node(1, 1)], ["1\t1"], ConstraintError, 1),
        ([node(1, 1), node(2, 1)], ["2\t1", "2"], ParseError, 2),
    ],
)
def test_malformed_inputs(tmp_path, nodes, edges, exc, lineno):
    with pytest.raises(exc) as err:
        load_dataset(*write_files(tmp_path, nodes, edges))
    assert err.value.lineno == lineno


def test_unlabeled_and_duplicate_edges(tmp_path):
    g = load_dataset(*write_files(tmp_path, [node(1, 1, "-"), node(2, 1, "3")], ["2\t1", "2\t1"]))
    assert g.labels.tolist() == [-1, 3]
    assert len(g.edges) == 2


def three_node(tmp_path):
    return load_dataset(*write_files(tmp_path, [node(1, 1), node(2, 1), node(3, 2)], ["2\t1", "3\t1", "3\t2"]))


def test_split_tasks_example(tmp_path):
    t1, t2 = split_tasks(three_node(tmp_path))
    assert (t1.t, t1.node_ids.tolist(), t1.edges.tolist()) == (1, [1, 2], [[2, 1]])
    assert (t2.t, t2.node_ids.tolist(), t2.edges.tolist()) == (2, [3, 1, 2], [[3, 1], [3, 2]])
    assert t2.is_new.tolist() == [True, False, False]
    # attributes only for the period's own nodes
    assert t2.features.shape == (1, 2)
    assert t2.labels.shape == (1,)


def test_single_period_is_one_task(tmp_path):
    g = load_dataset(*write_files(tmp_path, [node(1, 1), node(2, 1), node(3, 1)], ["2\t1", "3\t2"]))
    (task,) = split_tasks(g)
    assert sorted(task.node_ids.tolist()) == [1, 2, 3]
    assert len(task.edges) == 2


def test_isolated_node_task(tmp_path):
    g = load_dataset(*write_files(tmp_path, [node(1, 1), node(2, 1), node(3, 2)], ["2\t1"]))
    t2 = split_tasks(g)[1]
    assert t2.node_ids.tolist() == [3]
    assert len(t2.edges) == 0


def test_task_graph_view_hides_old_attributes(tmp_path):
    t2 = split_tasks(three_node(tmp_path))[1]
    g = t2.to_graph()
    assert g.n == 3
    np.testing.assert_array_equal(g.features[1:], 0.0)
    assert g.labels.tolist() == [0, -1, -1]
    assert g.adjacency[0, 1] == 1 and g.adjacency[0, 2] == 1


def test_split_invariants_on_synthetic():
    from taco.synthetic import SyntheticStreamSpec, generate_synthetic

    g = generate_synthetic(SyntheticStreamSpec(tasks=4, nodes_per_task=60, seed=3))
    tasks = split_tasks(g)
    new = np.concatenate([t.new_ids for t in tasks])
    assert sorted(new.tolist()) == sorted(g.node_ids.tolist())
    assert sum(len(t.edges) for t in tasks) == len(g.edges)
    tau = dict(zip(g.node_ids.tolist(), g.tau.tolist()))
    for t in tasks:
        assert all(tau[s] == t.t for s in t.edges[:, 0].tolist())
        targets = set(t.edges[:, 1].tolist())
        for v, is_new in zip(t.node_ids.tolist(), t.is_new.tolist()):
            assert (tau[v] == t.t) == is_new
            assert is_new or v in targets
    # pure: same input gives an identical sequence
    again = split_tasks(g)
    for a, b in zip(tasks, again):
        assert a.node_ids.tobytes() == b.node_ids.tobytes()
        assert a.edges.tobytes() == b.edges.tobytes()


def test_split_nodes_ratios_and_determinism(tmp_path):
    lines = [node(v, 1) for v in range(100)]
    (task,) = split_tasks(load_dataset(*write_files(tmp_path, lines, [])))
    s1 = split_nodes(task, np.random.default_rng(5))
    s2 = split_nodes(task, np.random.default_rng(5))
    assert (len(s1.train), len(s1.val), len(s1.test)) == (30, 20, 50)
    assert s1.train.tolist() == s2.train.tolist()
    assert not set(s1.train) & set(s1.test)
    assert sorted(np.concatenate([s1.train, s1.val, s1.test]).tolist()) == list(range(100))
