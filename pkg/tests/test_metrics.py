import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import balanced_accuracy_score, f1_score

from taco.metrics import MetricsMatrix, af_st, ap_af, bacc, macro_f1


def test_macro_f1_examples():
    assert macro_f1([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0
    assert macro_f1([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(1 / 3, abs=1e-15)
    assert macro_f1([1, 0], [0, 1]) == 0.0


def test_bacc_examples():
    assert bacc([2, 0, 1], [2, 0, 1]) == 1.0
    assert bacc([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5


def test_bacc_uniform_random_predictions():
    rng = np.random.default_rng(0)
    c, n = 4, 10_000
    truth = rng.integers(0, c, n)
    pred = rng.integers(0, c, n)
    assert abs(bacc(pred, truth) - 1 / c) <= 0.05


def test_empty_and_mismatched_inputs():
    for fn in (macro_f1, bacc):
        with pytest.raises(ValueError):
            fn([], [])
        with pytest.raises(ValueError):
            fn([0, 1], [0])


def test_absent_classes_are_excluded():
    # predicting an absent class hurts precision of nothing present
    assert bacc([0, 3], [0, 0]) == 0.5
    assert macro_f1([0, 0], [0, 0]) == 1.0


@pytest.mark.filterwarnings("ignore:A single label")
@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
def test_matches_sklearn_on_present_classes(pairs):
    pred = np.array([p for p, _ in pairs])
    truth = np.array([t for _, t in pairs])
    present = np.unique(truth)
    ref_f1 = f1_score(truth, pred, labels=present, average="macro", zero_division=0)
    assert macro_f1(pred, truth) == pytest.approx(ref_f1, abs=1e-12)
    recalls = [np.mean(pred[truth == k] == k) for k in present]
    assert bacc(pred, truth) == pytest.approx(np.mean(recalls), abs=1e-12)
    if set(pred) <= set(truth):
        assert bacc(pred, truth) == pytest.approx(balanced_accuracy_score(truth, pred), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40),
    st.permutations(range(4)),
)
def test_relabeling_invariance(pairs, perm):
    pred = np.array([p for p, _ in pairs])
    truth = np.array([t for _, t in pairs])
    perm = np.array(perm)
    assert macro_f1(perm[pred], perm[truth]) == pytest.approx(macro_f1(pred, truth), abs=1e-12)
    assert bacc(perm[pred], perm[truth]) == pytest.approx(bacc(pred, truth), abs=1e-12)


def test_ap_af_examples():
    assert ap_af([[0.8]]) == (0.8, 0.0)
    ap, af = ap_af([[0.9], [0.7, 0.8]])
    assert ap == 0.75
    assert math.isclose(af, 0.1, rel_tol=1e-15, abs_tol=1e-16)


def test_af_st_examples():
    assert af_st(np.full((3, 3), 0.6)) == 0.0
    assert math.isclose(af_st([[0.9], [0.7, 0.8]]), 0.1, rel_tol=1e-15, abs_tol=1e-16)
    assert af_st([[0.5], [0.7, 0.8]]) < 0


def test_constant_columns_give_zero_forgetting():
    a = np.tril(np.tile([0.3, 0.9, 0.5, 0.7], (4, 1)))
    a[np.triu_indices(4, 1)] = np.nan
    assert ap_af(a)[1] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_forgetting_non_negative_and_dominating_last_row(t, seed):
    rng = np.random.default_rng(seed)
    a = np.full((t, t), np.nan)
    for i in range(t):
        a[i, : i + 1] = rng.random(i + 1)
    assert ap_af(a)[1] >= 0
    a[t - 1, :] = np.nanmax(a, axis=0) + 0.0
    assert ap_af(a)[1] == 0.0


def test_incomplete_matrix_and_short_streams():
    m = MetricsMatrix.empty(2)
    m.record(0, 0, 0.9, 0.9)
    with pytest.raises(ValueError):
        ap_af(m.f1)
    with pytest.raises(ValueError):
        af_st([[0.9]])
    with pytest.raises(IndexError):
        m.record(0, 1, 0.5, 0.5)


def test_report_schema():
    m = MetricsMatrix.empty(2)
    m.record(0, 0, 0.9, 0.8)
    m.record(1, 0, 0.7, 0.6)
    m.record(1, 1, 0.8, 0.9)
    r = m.report()
    assert {"f1_ap", "f1_af", "bacc_ap", "bacc_af", "f1_af_st", "matrix"} <= set(r)
    assert r["matrix"] == [[0.9], [0.7, 0.8]]
    assert r["f1_ap"] == 0.75
