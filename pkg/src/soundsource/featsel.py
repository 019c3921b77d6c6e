"""Correlation-based feature subset selection (CFS).

Correlation is symmetric uncertainty over 10 equal-frequency bins; the
search is greedy forward selection that keeps going through up to five
consecutive non-improving additions before settling on the best subset seen.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pooling import pooled_feature_name

N_BINS = 10
STALE_LIMIT = 5


@dataclass
class FeatureSubset:
    indices: list[int]
    merit: float
    evaluated: int  # number of candidate subsets scored
    trace: list[tuple[int, float]]  # (added dim, merit after adding) per expansion

    def to_dict(self) -> dict:
        return {
            "selected": self.indices,
            "merit": self.merit,
            "evaluated_subsets": self.evaluated,
            "trace": [{"added": d, "merit": m} for d, m in self.trace],
            "features": [dict(zip(("statistic", "feature", "slot"), pooled_feature_name(i))) for i in self.indices]
            if all(i < 204 for i in self.indices)
            else [],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def equal_frequency_bins(x: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Integer bin codes from empirical quantile edges; equal values share a bin."""
    x = np.asarray(x, dtype=np.float64)
    edges = np.quantile(x, np.arange(1, n_bins) / n_bins)
    return np.searchsorted(edges, x, side="right")


def _entropy(codes: np.ndarray) -> float:
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def symmetric_uncertainty(a: np.ndarray, b: np.ndarray) -> float:
    """2 I(A;B) / (H(A) + H(B)) for discrete codes; 0 if either variable is constant."""
    ha, hb = _entropy(a), _entropy(b)
    if ha == 0 or hb == 0:
        return 0.0
    _, joint = np.unique(np.stack([a, b]), axis=1, return_inverse=True)
    mi = ha + hb - _entropy(joint.ravel())
    return float(np.clip(2.0 * mi / (ha + hb), 0.0, 1.0))


def _class_codes(labels) -> np.ndarray:
    labels = np.asarray(list(labels), dtype=object)
    _, codes = np.unique(labels.astype(str), return_inverse=True)
    return codes


def _check(X, labels):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise DataError("feature selection needs at least 2 clips")
    if len(X) != len(labels):
        raise DataError("feature matrix and label list do not match")
    if len(set(labels)) < 2:
        raise DataError("feature selection needs at least 2 classes")
    return X


def feature_class_correlation(X: np.ndarray, labels, dim: int) -> float:
    labels = list(labels)
    X = _check(X, labels)
    return symmetric_uncertainty(equal_frequency_bins(X[:, dim]), _class_codes(labels))


def feature_feature_correlation(X: np.ndarray, dim_a: int, dim_b: int) -> float:
    X = np.asarray(X, dtype=np.float64)
    return symmetric_uncertainty(equal_frequency_bins(X[:, dim_a]), equal_frequency_bins(X[:, dim_b]))


def cfs_merit(r_cf: np.ndarray, r_ff: np.ndarray) -> float:
    """Hall's merit k*mean(r_cf) / sqrt(k + k(k-1)*mean(r_ff)).

    ``r_cf`` holds the k feature-class correlations; ``r_ff`` is either the
    k x k feature-feature matrix or the mean off-diagonal value.
    """
    r_cf = np.atleast_1d(np.asarray(r_cf, dtype=np.float64))
    k = len(r_cf)
    if k == 0:
        raise DataError("merit of an empty subset is undefined")
    r_ff = np.asarray(r_ff, dtype=np.float64)
    if r_ff.ndim == 2:
        mean_ff = (r_ff.sum() - np.trace(r_ff)) / (k * (k - 1)) if k > 1 else 0.0
    else:
        mean_ff = float(r_ff)
    denom = np.sqrt(k + k * (k - 1) * mean_ff)
    return float(k * r_cf.mean() / denom) if denom > 0 else 0.0


class _Correlations:
    """Lazily computed, cached pairwise SU between discretised columns."""

    def __init__(self, X: np.ndarray, labels):
        self.codes = np.stack([equal_frequency_bins(X[:, d]) for d in range(X.shape[1])], axis=1)
        cls = _class_codes(labels)
        self.r_cf = np.array([symmetric_uncertainty(self.codes[:, d], cls) for d in range(X.shape[1])])
        self._ff: dict[tuple[int, int], float] = {}

    def ff(self, a: int, b: int) -> float:
        if a == b:
            return 1.0 if _entropy(self.codes[:, a]) > 0 else 0.0
        key = (a, b) if a < b else (b, a)
        if key not in self._ff:
            self._ff[key] = symmetric_uncertainty(self.codes[:, key[0]], self.codes[:, key[1]])
        return self._ff[key]


def select_features(X: np.ndarray, labels) -> FeatureSubset:
    labels = list(labels)
    X = _check(X, labels)
    corr = _Correlations(X, labels)
    d = X.shape[1]
    current: list[int] = []
    cf_sum = 0.0
    ff_sum = 0.0  # sum over unordered pairs within `current`
    best, best_merit = [], 0.0
    stale = 0
    evaluated = 0
    trace = []
    while len(current) < d and stale < STALE_LIMIT:
        k = len(current) + 1
        cand_merit, cand = -1.0, -1
        for j in range(d):
            if j in current:
                continue
            pair = sum(corr.ff(j, i) for i in current)
            mean_ff = (ff_sum + pair) / (k * (k - 1) / 2) if k > 1 else 0.0
            m = cfs_merit(np.full(k, (cf_sum + corr.r_cf[j]) / k), mean_ff)
            evaluated += 1
            if m > cand_merit:
                cand_merit, cand, cand_pair = m, j, pair
        current.append(cand)
        cf_sum += corr.r_cf[cand]
        ff_sum += cand_pair
        trace.append((cand, cand_merit))
        if cand_merit > best_merit:
            best, best_merit = list(current), cand_merit
            stale = 0
        else:
            stale += 1
    return FeatureSubset(sorted(best), best_merit, evaluated, trace)


def format_selection(subset: FeatureSubset) -> str:
    """Text table grouping selected pooled dims by statistic."""
    rows = [f"{'dim':>5}  {'statistic':<9}  {'feature':<10}  slot"]
    for i in subset.indices:
        stat, name, slot = pooled_feature_name(i)
        rows.append(f"{i:>5}  {stat:<9}  {name:<10}  {slot}")
    rows.append("")
    by_stat: dict[str, list[str]] = {}
    for i in subset.indices:
        stat, name, _ = pooled_feature_name(i)
        by_stat.setdefault(stat, []).append(name)
    for stat in ("max", "min", "mean"):
        if stat in by_stat:
            rows.append(f"{stat.capitalize():<5} {', '.join(by_stat[stat])}")
    rows.append(f"selected {len(subset.indices)} features, merit {subset.merit:.4f}")
    return "\n".join(rows)
