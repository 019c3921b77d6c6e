"""Clip -> pooled vector composition used by featurize, predict and the human gate."""

from __future__ import annotations

from .corpus import AudioClip, CorpusManifest, load_clip, normalize_peak
from .errors import DataError
from .features import extract_frame_features
from .pooling import PooledFeatureVector, pool


def clip_to_pooled(clip: AudioClip) -> PooledFeatureVector:
    clip = normalize_peak(clip)
    return pool(extract_frame_features(clip), clip.id, clip.label)


def featurize_manifest(manifest: CorpusManifest, on_skip=None, jobs: int = 1) -> list[PooledFeatureVector]:
    """Pooled vectors for every loadable record, in manifest order.

    Records that fail to load or normalise are reported through
    ``on_skip(record, reason)`` and left out.
    """
    tasks = [(str(manifest.resolve(r)), r.path, r.label) for r in manifest.records]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_featurize_one, tasks))
    else:
        results = [_featurize_one(t) for t in tasks]
    out = []
    for rec, res in zip(manifest.records, results):
        if isinstance(res, str):
            if on_skip is not None:
                on_skip(rec, res)
        else:
            out.append(res)
    return out


def _featurize_one(task) -> PooledFeatureVector | str:
    path, clip_id, label = task
    try:
        clip = load_clip(path)
        clip.id, clip.label = clip_id, label
        return clip_to_pooled(clip)
    except DataError as exc:
        return str(exc)
