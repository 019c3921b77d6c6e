import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from soundsource import LABELS, DataError
from soundsource.evaluation import (
    MERGE_IPOD_HEADPHONE,
    MERGE_PLAYBACK,
    confusion_matrix,
    cross_validate,
    cross_validate_binary,
    f1_scores,
    make_folds,
    merge_classes,
    report_from_confusion,
)

COMPOSITION = {"loudspeaker": 106, "ipod": 44, "headphone": 46, "human": 100}


def composition_labels():
    return [lab for lab, n in COMPOSITION.items() for _ in range(n)]


def test_folds_on_reference_composition():
    labels = np.array(composition_labels())
    plan = make_folds(labels, 10, 42)
    sizes = np.bincount(plan.assignment, minlength=10)
    assert set(sizes) <= {29, 30} and sizes.sum() == 296
    folds = plan.folds()
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(296))
    for lab, n in COMPOSITION.items():
        per_fold = np.bincount(plan.assignment[labels == lab], minlength=10)
        assert per_fold.max() - per_fold.min() <= 1
        assert np.all(np.abs(per_fold - n / 10) < 1)


def test_leave_one_out_and_determinism():
    labels = composition_labels()[:: 10]
    plan = make_folds(labels, len(labels), 0)
    assert np.all(np.bincount(plan.assignment) == 1)
    assert np.array_equal(make_folds(labels, 5, 3).assignment, make_folds(labels, 5, 3).assignment)
    with pytest.raises(DataError):
        make_folds(labels, 1)
    with pytest.raises(DataError):
        make_folds(labels, len(labels) + 1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(LABELS), min_size=4, max_size=80), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_fold_invariants(labels, k, seed):
    if k > len(labels):
        k = len(labels)
    plan = make_folds(labels, k, seed)
    sizes = np.bincount(plan.assignment, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    arr = np.array(labels)
    for lab in set(labels):
        c = np.bincount(plan.assignment[arr == lab], minlength=k)
        assert c.max() - c.min() <= 1


def test_f1_hand_examples():
    scores, macro = f1_scores(np.diag([50, 50]))
    assert macro == 1.0 and all(s.f1 == 1.0 for s in scores.values())
    scores, _ = f1_scores(np.array([[8, 4], [2, 86]]), ["a", "b"])
    assert scores["a"].precision == 0.8
    assert scores["a"].recall == pytest.approx(2 / 3, abs=1e-15)
    assert scores["a"].f1 == pytest.approx(8 / 11, abs=1e-15)
    scores, _ = f1_scores(np.array([[5, 0, 0], [0, 5, 0], [0, 0, 0]]))
    assert scores["2"].f1 == 0.0
    with pytest.raises(DataError):
        f1_scores(np.zeros((2, 3)))


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 5)).map(lambda t: (t[0], t[0])), elements=st.integers(0, 50)))
def test_transpose_swaps_precision_and_recall(M):
    a, _ = f1_scores(M)
    b, _ = f1_scores(M.T)
    for c in a:
        assert a[c].precision == pytest.approx(b[c].recall, abs=1e-12)
        assert a[c].recall == pytest.approx(b[c].precision, abs=1e-12)
        assert 0 <= a[c].f1 <= 1


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, (4, 4), elements=st.integers(0, 40)))
def test_merging_properties(M):
    rep = report_from_confusion(M, list(LABELS))
    play = merge_classes(rep, MERGE_PLAYBACK)
    assert play.total == rep.total
    assert np.trace(play.confusion) >= np.trace(rep.confusion)
    ih = merge_classes(rep, MERGE_IPOD_HEADPHONE)
    li = LABELS.index("loudspeaker")
    kept = np.delete(np.delete(M, li, 0), li, 1)
    assert ih.total == kept.sum() <= rep.total
    ident = merge_classes(rep, {c: c for c in LABELS})
    assert np.array_equal(ident.confusion, rep.confusion) and ident.macro_f1 == rep.macro_f1


def test_block_diagonal_merge():
    rep = report_from_confusion(np.diag([3, 4, 5, 6]), list(LABELS))
    merged = merge_classes(rep, MERGE_PLAYBACK)
    assert merged.labels == ["human", "playback"]
    assert np.array_equal(merged.confusion, np.diag([3, 15]))
    with pytest.raises(DataError):
        merge_classes(rep, {"human": "human"})


def test_one_hot_features_are_perfect():
    labels = [lab for lab in LABELS for _ in range(12)]
    X = np.array([np.eye(4)[LABELS.index(lab)] for lab in labels])
    rep = cross_validate(X, labels, plan=make_folds(labels, 4, 0))
    assert rep.macro_f1 == 1.0
    assert np.array_equal(rep.confusion, np.diag([12] * 4))
    assert rep.total == 48 and len(rep.fold_accuracies) == 4


@pytest.mark.slow
def test_permuted_labels_give_chance_macro_f1(reference_run):
    from soundsource.pooling import read_pooled_csv

    _, labels, X = read_pooled_csv(reference_run["features"])
    shuffled = list(np.random.default_rng(42).permutation(labels))
    rep = cross_validate(X, shuffled, plan=make_folds(shuffled, 10, 42))
    assert abs(rep.macro_f1 - 0.25) <= 0.15


def test_training_split_missing_a_class():
    labels = ["human"] * 3 + ["ipod"] * 3
    X = np.arange(6.0)[:, None]
    plan = make_folds(labels, 2, 0)
    plan.assignment[:] = [0, 0, 0, 1, 1, 1]
    with pytest.raises(DataError, match="fold 0.*human"):
        cross_validate(X, labels, plan=plan)


def test_confusion_matrix_rows_are_true_counts():
    M = confusion_matrix(["a", "a", "b"], ["a", "b", "b"], ["a", "b"])
    assert np.array_equal(M, [[1, 1], [0, 1]])


def test_retrained_binary_drops_loudspeaker():
    r = np.random.default_rng(0)
    labels = [lab for lab in LABELS for _ in range(10)]
    X = np.array([r.normal(LABELS.index(lab) * 3, 0.3, 2) for lab in labels])
    rep = cross_validate_binary(X, labels, MERGE_IPOD_HEADPHONE, k=5, seed=1)
    assert rep.labels == ["human", "ipod+headphone"] and rep.total == 30
