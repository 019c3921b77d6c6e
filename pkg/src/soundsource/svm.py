"""RBF-kernel SVM: feature scaling, SMO training, one-vs-one voting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from . import LABELS
from .errors import DataError, InvariantViolation

FORMAT_VERSION = 1
SCALING_METHODS = ("minmax", "zscore")
_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    gamma: float = 0.25
    tolerance: float = 1e-3
    max_passes: int = 200
    scaling: str = "minmax"

    def __post_init__(self):
        if not (self.C > 0 and self.gamma > 0 and self.tolerance > 0 and self.max_passes >= 1):
            raise DataError(f"invalid SVM configuration: {self}")
        if self.scaling not in SCALING_METHODS:
            raise DataError(f"unknown scaling method {self.scaling!r}")


def rbf_kernel(x, y, gamma: float) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(A: np.ndarray, B: np.ndarray | None = None, gamma: float = 0.25) -> np.ndarray:
    """Kernel matrix exp(-gamma * |a - b|^2) between the rows of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DataError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    if B is A:
        # exact zeros on the diagonal and exact symmetry
        np.fill_diagonal(sq, 0.0)
        sq = 0.5 * (sq + sq.T)
    return np.exp(-gamma * sq)


@dataclass
class Standardizer:
    """Per-dimension affine map (x - center) / scale fitted on training data.

    ``method`` is "zscore" (mean / population std) or "minmax" (min / range,
    mapping the training set onto [0, 1]). Dimensions that are constant in
    training keep scale 1 and are flagged in ``constant``.
    """

    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    method: str = "zscore"

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != len(self.center):
            raise DataError(f"dimension mismatch: expected {len(self.center)}, got {X.shape[-1]}")
        return (X - self.center) / self.scale


def fit_standardizer(X: np.ndarray, method: str = "zscore") -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise DataError("standardizer needs at least 2 training vectors")
    if method == "zscore":
        center, scale = X.mean(axis=0), X.std(axis=0)
    elif method == "minmax":
        center = X.min(axis=0)
        scale = X.max(axis=0) - center
    else:
        raise DataError(f"unknown scaling method {method!r}")
    constant = ~(scale > 0)
    return Standardizer(center, np.where(constant, 1.0, scale), constant, method)


def apply_standardizer(s: Standardizer, X: np.ndarray) -> np.ndarray:
    return s.apply(X)


@dataclass
class BinaryMachine:
    """Decision f(x) = sum_i coef_i K(sv_i, x) + bias; f > 0 votes for ``positive``."""

    positive: str
    negative: str
    support: np.ndarray  # indices into the owning model's support vector matrix
    coef: np.ndarray  # alpha_i * y_i
    bias: float
    alpha: np.ndarray | None = field(default=None, repr=False)  # full dual solution, training only
    iterations: int = 0
    converged: bool = True


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int | None = None):
    """Solve the SVM dual by SMO with maximal-violating-pair working sets.

    Minimises 0.5 a'Qa - sum(a), Q = yy'K, s.t. y'a = 0, 0 <= a <= C.
    Returns (alpha, bias, iterations, converged). Ties in pair selection go to
    the lowest index, so the result is a pure function of the input order.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if max_iter is None:
        max_iter = 200 * n
    alpha = np.zeros(n)
    G = -np.ones(n)
    Kd = np.diag(K)
    pos = y > 0
    converged = False
    it = 0
    while it < max_iter:
        below = alpha < C
        above = alpha > 0
        up = (below & pos) | (above & ~pos)
        low = (below & ~pos) | (above & pos)
        score = -y * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        quad = max(Kd[i] + Kd[j] - 2.0 * K[i, j], _TAU)
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ni, nj = ai - delta, aj + delta
            if s > C:
                if ni > C:
                    ni, nj = C, s - C
            elif nj < 0:
                nj, ni = 0.0, s
            if s > C:
                if nj > C:
                    nj, ni = C, s - C
            elif ni < 0:
                ni, nj = 0.0, s
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += y * (K[:, i] * (y[i] * di) + K[:, j] * (y[j] * dj))

    # bias: average over free vectors, else midpoint of the feasible interval
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & ~pos) | (~at_upper & pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[~ub_mask].max() if (~ub_mask).any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(ub if np.isfinite(ub) else lb)
    return alpha, -rho, it, converged


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """SVM dual objective sum(a) - 0.5 a'Qa (to be maximised)."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def train_binary_smo(X: np.ndarray, y: np.ndarray, config: SvmConfig = SvmConfig()) -> BinaryMachine:
    """Train one +1/-1 machine on already-standardised vectors.

    ``support`` in the result indexes rows of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise DataError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise DataError("binary SVM training needs both classes present")
    K = rbf_gram(X, gamma=config.gamma)
    alpha, bias, it, conv = smo_solve(K, y, config.C, config.tolerance, config.max_passes * len(y))
    sv = np.flatnonzero(alpha > 0)
    return BinaryMachine("+1", "-1", sv, alpha[sv] * y[sv], bias, alpha=alpha, iterations=it, converged=conv)


@dataclass
class SvmModel:
    classes: list[str]
    machines: list[BinaryMachine]
    support_vectors: np.ndarray
    standardizer: Standardizer
    config: SvmConfig
    feature_indices: list[int] | None = None  # input columns used, None = all
    input_dim: int | None = None
    version: int = FORMAT_VERSION

    @property
    def dim(self) -> int:
        """Length of the raw vectors ``predict`` accepts."""
        if self.input_dim is not None:
            return self.input_dim
        return len(self.standardizer.center)

    def prepare(self, X: np.ndarray) -> np.ndarray:
        """Select the model's input columns and scale them."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DataError(f"dimension mismatch: model expects {self.dim}, got {X.shape[-1]}")
        if self.feature_indices is not None:
            X = X[..., self.feature_indices]
        return self.standardizer.apply(X)

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        """Raw machine outputs for already-standardised rows, shape (n, n_machines)."""
        Kx = rbf_gram(self.support_vectors, X, self.config.gamma)
        return np.stack([m.coef @ Kx[m.support] + m.bias for m in self.machines], axis=-1)

    def to_dict(self) -> dict:
        return {
            "format": "soundsource-svm",
            "version": self.version,
            "config": asdict(self.config),
            "classes": list(self.classes),
            "input_dim": self.dim,
            "feature_indices": self.feature_indices,
            "standardizer": {
                "method": self.standardizer.method,
                "center": self.standardizer.center.tolist(),
                "scale": self.standardizer.scale.tolist(),
                "constant": self.standardizer.constant.astype(int).tolist(),
            },
            "support_vectors": self.support_vectors.tolist(),
            "machines": [
                {
                    "positive": m.positive,
                    "negative": m.negative,
                    "support": m.support.tolist(),
                    "coef": m.coef.tolist(),
                    "bias": m.bias,
                }
                for m in self.machines
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        if d.get("format") != "soundsource-svm":
            raise DataError("not a soundsource SVM model document")
        if d.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported model format version {d.get('version')}")
        st = d["standardizer"]
        sv = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, len(st["center"]))
        return cls(
            classes=list(d["classes"]),
            machines=[
                BinaryMachine(
                    m["positive"],
                    m["negative"],
                    np.array(m["support"], dtype=np.int64),
                    np.array(m["coef"], dtype=np.float64),
                    float(m["bias"]),
                )
                for m in d["machines"]
            ],
            support_vectors=sv,
            standardizer=Standardizer(
                np.array(st["center"], dtype=np.float64),
                np.array(st["scale"], dtype=np.float64),
                np.array(st["constant"], dtype=bool),
                st["method"],
            ),
            config=SvmConfig(**d["config"]),
            feature_indices=d.get("feature_indices"),
            input_dim=d.get("input_dim"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SvmModel":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed model document: {exc}") from None


def class_order(labels) -> list[str]:
    """Known source labels in canonical order, anything else alphabetically after."""
    uniq = set(labels)
    known = [lab for lab in LABELS if lab in uniq]
    return known + sorted(uniq - set(LABELS))


def train_multiclass(
    X: np.ndarray, labels, config: SvmConfig = SvmConfig(), classes=None, feature_indices=None
) -> SvmModel:
    """Fit the scaler on all of ``X`` and train one machine per class pair.

    With ``feature_indices`` only those columns of ``X`` are used; the model
    still accepts full-width vectors at prediction time.
    """
    X = np.asarray(X, dtype=np.float64)
    input_dim = X.shape[1] if X.ndim == 2 else None
    if feature_indices is not None:
        feature_indices = [int(i) for i in feature_indices]
        X = X[:, feature_indices]
    labels = np.asarray(list(labels), dtype=object)
    if X.ndim != 2 or len(X) != len(labels):
        raise DataError("feature matrix and label list do not match")
    classes = list(classes) if classes is not None else class_order(labels)
    counts = {c: int((labels == c).sum()) for c in classes}
    if len(classes) < 2:
        raise DataError(f"training needs at least 2 classes; got {classes}")
    thin = [c for c, n in counts.items() if n < 2]
    if thin:
        raise DataError(f"every class needs at least 2 training examples; too few for: {', '.join(thin)}")
    scaler = fit_standardizer(X, config.scaling)
    Z = scaler.apply(X)
    machines, used = [], []
    for a, b in combinations(classes, 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        m = train_binary_smo(Z[rows], y, config)
        m.positive, m.negative = a, b
        m.support = rows[m.support]
        machines.append(m)
        used.append(m.support)
    sv_rows = np.unique(np.concatenate(used)) if used else np.array([], dtype=np.int64)
    remap = {int(r): k for k, r in enumerate(sv_rows)}
    for m in machines:
        m.support = np.array([remap[int(r)] for r in m.support], dtype=np.int64)
    return SvmModel(classes, machines, Z[sv_rows], scaler, config, feature_indices, input_dim)


@dataclass
class VoteRecord:
    votes: dict[str, int]
    confidence: dict[str, float]  # sum of |decision| over machines won
    decisions: list[tuple[str, str, float]]


def _vote(model: SvmModel, dec: np.ndarray) -> tuple[str, VoteRecord]:
    votes = {c: 0 for c in model.classes}
    conf = {c: 0.0 for c in model.classes}
    record = []
    for m, f in zip(model.machines, dec):
        winner = m.positive if f > 0 else m.negative
        votes[winner] += 1
        conf[winner] += abs(float(f))
        record.append((m.positive, m.negative, float(f)))
    order = {c: k for k, c in enumerate(model.classes)}
    label = max(model.classes, key=lambda c: (votes[c], conf[c], -order[c]))
    return label, VoteRecord(votes, conf, record)


def predict(model: SvmModel, x: np.ndarray) -> tuple[str, VoteRecord]:
    """Classify one raw (unstandardised) pooled vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != model.dim:
        raise DataError(f"dimension mismatch: model expects {model.dim}, got {x.shape}")
    dec = model.decision_values(model.prepare(x)[None, :])[0]
    return _vote(model, dec)


def predict_batch(model: SvmModel, X: np.ndarray) -> list[str]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    dec = model.decision_values(model.prepare(X))
    return [_vote(model, row)[0] for row in dec]


def check_machine(m: BinaryMachine, C: float, atol: float = 1e-6) -> None:
    """Raise InvariantViolation if a trained machine breaks dual feasibility."""
    alpha = np.abs(m.coef)
    if np.any(alpha <= 0) or np.any(alpha > C * (1 + 1e-12)):
        raise InvariantViolation(f"machine {m.positive}/{m.negative}: alpha outside (0, C]")
    if abs(m.coef.sum()) > atol:
        raise InvariantViolation(f"machine {m.positive}/{m.negative}: sum(alpha*y) = {m.coef.sum():g}")


def gate_human(model: SvmModel, clip) -> str:
    """'accept' iff the full pipeline classifies the clip as a live human."""
    from .pipeline import clip_to_pooled

    if "human" not in model.classes:
        raise DataError("model has no 'human' class; cannot gate")
    try:
        vec = clip_to_pooled(clip).values
    except DataError:
        # silent input cannot be normalised; it is never a live speaker
        return "reject"
    label, _ = predict(model, vec)
    return "accept" if label == "human" else "reject"
