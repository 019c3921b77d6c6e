"""Stratified k-fold cross-validation and confusion-matrix metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .svm import SvmConfig, class_order, predict_batch, train_multiclass

MERGE_PLAYBACK = {"human": "human", "loudspeaker": "playback", "ipod": "playback", "headphone": "playback"}
# loudspeaker clips are dropped entirely in this variant
MERGE_IPOD_HEADPHONE = {"human": "human", "loudspeaker": None, "ipod": "ipod+headphone", "headphone": "ipod+headphone"}
MERGE_MAPS = {"playback": MERGE_PLAYBACK, "ipod-headphone": MERGE_IPOD_HEADPHONE}


@dataclass
class FoldPlan:
    k: int
    seed: int
    assignment: np.ndarray  # fold index per dataset row

    def folds(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == f) for f in range(self.k)]


def make_folds(labels, k: int = 10, seed: int = 42) -> FoldPlan:
    """Stratified fold assignment.

    Rows are shuffled within each class (seeded), classes are laid end to end
    in canonical order, and folds are dealt round-robin along that sequence.
    Both the per-class and the overall fold sizes then differ by at most one.
    """
    labels = np.asarray(list(labels), dtype=object)
    n = len(labels)
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds the dataset size {n}")
    rng = np.random.default_rng(seed)
    order = []
    for c in class_order(labels):
        rows = np.flatnonzero(labels == c)
        order.append(rows[rng.permutation(len(rows))])
    order = np.concatenate(order)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, seed, assignment)


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    labels: list[str]
    confusion: np.ndarray
    scores: dict[str, ClassScores] = field(default_factory=dict)
    macro_f1: float = 0.0
    fold_accuracies: list[float] = field(default_factory=list)
    predictions: list[str] | None = None
    merged: dict[str, "EvalReport"] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        t = self.total
        return float(np.trace(self.confusion) / t) if t else 0.0

    def to_dict(self) -> dict:
        d = {
            "labels": list(self.labels),
            "confusion": self.confusion.astype(int).tolist(),
            "per_class": {
                c: {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for c, s in self.scores.items()
            },
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
        }
        if self.fold_accuracies:
            d["fold_accuracies"] = list(self.fold_accuracies)
        if self.merged:
            d["merged"] = {name: r.to_dict() for name, r in self.merged.items()}
        return d

    def format_table(self) -> str:
        w = max(10, *(len(c) for c in self.labels)) + 1
        lines = ["confusion (rows = true, columns = predicted)", " " * w + "".join(f"{c:>{w}}" for c in self.labels)]
        for c, row in zip(self.labels, self.confusion):
            lines.append(f"{c:<{w}}" + "".join(f"{int(v):>{w}}" for v in row))
        lines.append("")
        lines.append(f"{'class':<{w}}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>10}")
        for c, s in self.scores.items():
            lines.append(f"{c:<{w}}{s.precision:>10.4f}{s.recall:>10.4f}{s.f1:>10.4f}{s.support:>10d}")
        lines.append(f"{'macro-F1':<{w}}{self.macro_f1:>40.4f}")
        return "\n".join(lines)


def f1_scores(confusion: np.ndarray, labels=None) -> tuple[dict[str, ClassScores], float]:
    """Per-class precision/recall/F1 (zero on zero denominators) and their macro mean."""
    M = np.asarray(confusion, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError(f"confusion matrix must be square, got shape {M.shape}")
    if np.any(M < 0):
        raise DataError("confusion matrix has negative entries")
    labels = list(labels) if labels is not None else [str(i) for i in range(len(M))]
    tp = np.diag(M)
    col, row = M.sum(axis=0), M.sum(axis=1)
    scores = {}
    for c, t, cs, rs in zip(labels, tp, col, row):
        p = t / cs if cs else 0.0
        r = t / rs if rs else 0.0
        # 2PR/(P+R) rewritten as one division: exact on hand-checkable counts
        f = 2 * t / (rs + cs) if t else 0.0
        scores[c] = ClassScores(float(p), float(r), float(f), int(rs))
    macro = float(np.mean([s.f1 for s in scores.values()])) if scores else 0.0
    return scores, macro


def confusion_matrix(y_true, y_pred, labels) -> np.ndarray:
    index = {c: i for i, c in enumerate(labels)}
    M = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        M[index[t], index[p]] += 1
    return M


def report_from_confusion(confusion, labels, **kw) -> EvalReport:
    scores, macro = f1_scores(confusion, labels)
    return EvalReport(list(labels), np.asarray(confusion, dtype=np.int64), scores, macro, **kw)


def merge_classes(report: EvalReport, merge_map: dict) -> EvalReport:
    """Sum confusion rows/columns by group; labels mapped to None are dropped."""
    missing = [c for c in report.labels if c not in merge_map]
    if missing:
        raise DataError(f"merge map has no entry for: {', '.join(missing)}")
    groups = []
    for c in report.labels:
        g = merge_map[c]
        if g is not None and g not in groups:
            groups.append(g)
    P = np.zeros((len(report.labels), len(groups)), dtype=np.int64)
    for i, c in enumerate(report.labels):
        if merge_map[c] is not None:
            P[i, groups.index(merge_map[c])] = 1
    return report_from_confusion(P.T @ report.confusion @ P, groups)


def cross_validate(X: np.ndarray, labels, config: SvmConfig = SvmConfig(), plan: FoldPlan | None = None) -> EvalReport:
    """Train on k-1 folds, predict the held-out fold, aggregate all predictions."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(list(labels), dtype=object)
    if plan is None:
        plan = make_folds(labels)
    if len(plan.assignment) != len(labels):
        raise DataError("fold plan does not cover the dataset")
    classes = class_order(labels)
    pred = np.empty(len(labels), dtype=object)
    accs = []
    for f, test in enumerate(plan.folds()):
        train = np.flatnonzero(plan.assignment != f)
        present = set(labels[train])
        lost = [c for c in classes if c not in present]
        if lost:
            raise DataError(f"fold {f}: training split has no examples of {', '.join(lost)}")
        model = train_multiclass(X[train], labels[train], config, classes=classes)
        pred[test] = predict_batch(model, X[test])
        accs.append(float(np.mean(pred[test] == labels[test])))
    M = confusion_matrix(labels, pred, classes)
    return report_from_confusion(M, classes, fold_accuracies=accs, predictions=list(pred))


def cross_validate_binary(X, labels, merge_map: dict, config: SvmConfig = SvmConfig(), k: int = 10, seed: int = 42) -> EvalReport:
    """Relabel by ``merge_map`` (dropping None groups) and cross-validate a freshly trained model."""
    labels = list(labels)
    missing = sorted({c for c in labels if c not in merge_map})
    if missing:
        raise DataError(f"merge map has no entry for: {', '.join(missing)}")
    keep = np.array([merge_map[c] is not None for c in labels])
    grouped = [merge_map[c] for c in labels if merge_map[c] is not None]
    Xk = np.asarray(X)[keep]
    return cross_validate(Xk, grouped, config, make_folds(grouped, k, seed))
