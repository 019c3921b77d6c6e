"""Clip-level min/max/mean pooling of frame features."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import FEATURE_NAMES, N_FEATURES, VOICED_SLOTS, VUV

STATISTICS = ("max", "min", "mean")
POOLED_DIM = len(STATISTICS) * N_FEATURES


@dataclass
class PooledFeatureVector:
    values: np.ndarray
    clip_id: str = ""
    label: str | None = None


def pooled_dimension(frame_dim: int) -> int:
    return len(STATISTICS) * frame_dim


def pooled_feature_name(dim: int) -> tuple[str, str, int]:
    """Map a pooled index to (statistic, frame feature name, frame slot)."""
    if not 0 <= dim < POOLED_DIM:
        raise IndexError(f"pooled dimension {dim} out of range")
    stat, slot = divmod(dim, N_FEATURES)
    return STATISTICS[stat], FEATURE_NAMES[slot], slot


def pool_matrix(frames: np.ndarray, voiced_slots: np.ndarray | None = None, vuv_slot: int | None = VUV) -> np.ndarray:
    """Pool an (n_frames, d) matrix into [max | min | mean], length 3*d.

    Slots flagged in ``voiced_slots`` are pooled over voiced frames only (as
    given by column ``vuv_slot``) and are zero when the clip has none.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or len(frames) == 0:
        raise DataError("cannot pool an empty frame sequence")
    d = frames.shape[1]
    mx, mn, mean = frames.max(axis=0), frames.min(axis=0), frames.mean(axis=0)
    if voiced_slots is not None and vuv_slot is not None:
        voiced = frames[:, vuv_slot] > 0
        if voiced.any():
            vf = frames[voiced][:, voiced_slots]
            mx[voiced_slots], mn[voiced_slots], mean[voiced_slots] = vf.max(axis=0), vf.min(axis=0), vf.mean(axis=0)
        else:
            mx[voiced_slots] = mn[voiced_slots] = mean[voiced_slots] = 0.0
    # guard the min <= mean <= max invariant against last-ulp summation error
    mean = np.clip(mean, mn, mx)
    out = np.concatenate([mx, mn, mean])
    assert out.shape == (pooled_dimension(d),)
    return out


def pool(frames: np.ndarray, clip_id: str = "", label: str | None = None) -> PooledFeatureVector:
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[1] != N_FEATURES:
        raise DataError(f"expected (n_frames, {N_FEATURES}) frame features, got shape {frames.shape}")
    return PooledFeatureVector(pool_matrix(frames, VOICED_SLOTS, VUV), clip_id, label)


POOLED_HEADER = ["clip_id", "label"] + [f"f{i}" for i in range(1, POOLED_DIM + 1)]


def pooled_to_csv(vectors) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POOLED_HEADER)
    for v in vectors:
        w.writerow([v.clip_id, v.label or ""] + [repr(float(x)) for x in v.values])
    return buf.getvalue()


def read_pooled_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Load a pooled feature file; returns (ids, labels, X)."""
    ids, labels, rows = [], [], []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["clip_id", "label"]:
            raise DataError(f"{path}: not a pooled feature file (bad header)")
        width = len(header)
        for rowno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DataError(f"{path}: row {rowno}: expected {width} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row[2:]])
            except ValueError as exc:
                raise DataError(f"{path}: row {rowno}: {exc}") from None
            ids.append(row[0])
            labels.append(row[1])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), width - 2)
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature values")
    return ids, labels, X
