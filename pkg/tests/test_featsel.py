import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundsource import DataError
from soundsource.featsel import (
    _Correlations,
    cfs_merit,
    equal_frequency_bins,
    feature_class_correlation,
    feature_feature_correlation,
    format_selection,
    select_features,
    symmetric_uncertainty,
)


def encoded_dataset(seed=0, n=400, d=204):
    """Dims 0-2 are the three bits of an 8-way class code, the rest uniform noise."""
    r = np.random.default_rng(seed)
    cls = r.integers(0, 8, n)
    X = r.uniform(size=(n, d))
    for b in range(3):
        X[:, b] = ((cls >> b) & 1) + r.uniform(-0.1, 0.1, n)
    return X, [f"c{c}" for c in cls]


def test_identical_feature_has_unit_su():
    labels = ["a", "b", "c", "d"] * 25
    X = np.array([[{"a": 0, "b": 1, "c": 2, "d": 3}[lab]] for lab in labels], dtype=float)
    assert feature_class_correlation(X, labels, 0) == pytest.approx(1.0)
    assert feature_feature_correlation(np.hstack([X, X]), 0, 0) == pytest.approx(1.0)


def test_noise_is_uncorrelated_with_class():
    r = np.random.default_rng(0)
    labels = list(r.choice(["a", "b", "c", "d"], 400))
    X = r.uniform(size=(400, 1))
    assert feature_class_correlation(X, labels, 0) < 0.1


def test_constant_feature_is_uncorrelated():
    assert symmetric_uncertainty(np.zeros(10, int), np.arange(10) % 2) == 0.0


def test_equal_frequency_bins():
    codes = equal_frequency_bins(np.arange(100.0))
    assert np.array_equal(np.bincount(codes), [10] * 10)


def test_merit_formula():
    assert cfs_merit([1.0], np.ones((1, 1))) == 1.0
    assert cfs_merit([1.0, 1.0], np.ones((2, 2))) == pytest.approx(1.0)
    assert cfs_merit([0.5, 0.5], np.eye(2)) == pytest.approx(1 / np.sqrt(2))
    assert cfs_merit([0.3, 0.6], 0.2) == pytest.approx(0.9 / np.sqrt(2 + 2 * 0.2))
    with pytest.raises(DataError):
        cfs_merit([], np.zeros((0, 0)))


def test_recovers_encoded_dims_deterministically():
    X, labels = encoded_dataset()
    a = select_features(X, labels)
    assert {0, 1, 2} <= set(a.indices) and len(a.indices) <= 8
    b = select_features(X, labels)
    assert a.indices == b.indices and a.merit == b.merit and a.trace == b.trace
    assert a.indices == sorted(set(a.indices)) and 0 <= min(a.indices) and max(a.indices) < 204
    assert a.merit >= 0
    # exhaustive check over all subsets of size <= 3 drawn from the first 8 dims
    corr = _Correlations(X, labels)
    for k in (1, 2, 3):
        for sub in itertools.combinations(range(8), k):
            rff = np.array([[corr.ff(i, j) for j in sub] for i in sub])
            assert cfs_merit(corr.r_cf[list(sub)], rff) <= a.merit + 1e-12
    text = format_selection(a)
    assert "selected" in text and "F0" in text


def test_perfect_dim_selected_first():
    r = np.random.default_rng(3)
    labels = list(r.choice(["x", "y"], 200))
    X = r.uniform(size=(200, 10))
    X[:, 6] = [1.0 if lab == "x" else 0.0 for lab in labels]
    sub = select_features(X, labels)
    assert sub.trace[0][0] == 6


def test_duplicate_never_increases_merit():
    X, labels = encoded_dataset(1, 300, 6)
    corr = _Correlations(np.hstack([X, X[:, :1]]), labels)
    base = [0, 1]
    rff = lambda s: np.array([[corr.ff(i, j) for j in s] for i in s])
    m_base = cfs_merit(corr.r_cf[base], rff(base))
    dup = base + [6]
    assert cfs_merit(corr.r_cf[dup], rff(dup)) <= m_base + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16))
def test_single_feature_merit_is_rcf(seed):
    r = np.random.default_rng(seed)
    labels = list(r.choice(["a", "b", "c"], 60))
    X = r.normal(size=(60, 3))
    rcf = feature_class_correlation(X, labels, 1)
    assert cfs_merit([rcf], np.ones((1, 1))) == pytest.approx(rcf)
    assert 0 <= rcf <= 1


def test_degenerate_inputs():
    with pytest.raises(DataError):
        select_features(np.zeros((5, 3)), ["a"] * 5)
    with pytest.raises(DataError):
        select_features(np.zeros((1, 3)), ["a"])
