"""Corpus manifests, WAV decoding and peak normalisation."""

from __future__ import annotations

import csv
import io
import os
import wave
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import LABELS, SAMPLE_RATE
from .errors import DataError

MANIFEST_FIELDS = ("path", "label", "position", "direction", "environment", "device")
POSITIONS = tuple(f"P{i}" for i in range(1, 23))
DIRECTIONS = tuple(str(i) for i in range(1, 6))
MIN_SAMPLES = 512


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    id: str = ""
    label: str | None = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: str
    position: str | None = None
    direction: str | None = None
    environment: str | None = None
    device: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise DataError(f"unknown label {self.label!r}; expected one of {', '.join(LABELS)}")
        if self.position is not None and self.position not in POSITIONS:
            raise DataError(f"position {self.position!r} is not one of P1..P22")
        if self.direction is not None and self.direction not in DIRECTIONS:
            raise DataError(f"direction {self.direction!r} is not one of 1..5")


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[SampleRecord, ...] = ()
    root: Path = field(default_factory=Path)

    @property
    def class_counts(self) -> dict[str, int]:
        counts = Counter(r.label for r in self.records)
        return {lab: counts[lab] for lab in LABELS if counts[lab]}

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def resolve(self, record: SampleRecord) -> Path:
        p = Path(record.path)
        return p if p.is_absolute() else self.root / p

    def __len__(self) -> int:
        return len(self.records)


def load_manifest(path, check_files: bool = True) -> CorpusManifest:
    """Read a manifest CSV. Relative audio paths are resolved against the manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty manifest (missing header)")
        missing = [f for f in ("path", "label") if f not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: header lacks column(s) {', '.join(missing)}")
        records = []
        seen = set()
        # header is row 1
        for rowno, row in enumerate(reader, start=2):
            if None in row:
                raise DataError(f"{path}: row {rowno}: too many fields")
            try:
                rec = SampleRecord(
                    path=(row.get("path") or "").strip(),
                    label=(row.get("label") or "").strip(),
                    **{k: (row.get(k) or "").strip() or None for k in MANIFEST_FIELDS[2:]},
                )
            except DataError as exc:
                raise DataError(f"{path}: row {rowno}: {exc}") from None
            if not rec.path:
                raise DataError(f"{path}: row {rowno}: empty path")
            if rec.path in seen:
                raise DataError(f"{path}: row {rowno}: duplicate path {rec.path!r}")
            seen.add(rec.path)
            records.append(rec)
    manifest = CorpusManifest(tuple(records), path.parent)
    if check_files:
        for i, rec in enumerate(manifest.records):
            if not manifest.resolve(rec).is_file():
                raise DataError(f"{path}: row {i + 2}: audio file not found: {rec.path}")
    return manifest


def manifest_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_FIELDS)
    for r in records:
        w.writerow([r.path, r.label] + [getattr(r, k) or "" for k in MANIFEST_FIELDS[2:]])
    return buf.getvalue()


def write_manifest(path, records) -> None:
    atomic_write_text(path, manifest_to_csv(records))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _decode_pcm(raw: bytes, width: int, channels: int) -> np.ndarray:
    if width == 1:
        x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 2:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    else:
        raise DataError(f"unsupported PCM sample width: {8 * width} bits")
    return x.reshape(-1, channels)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV into a (n_samples, n_channels) float array in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise DataError(f"{path}: unreadable WAV ({exc})") from None
    if channels not in (1, 2):
        raise DataError(f"{path}: {channels} channels; only mono or stereo is supported")
    usable = len(raw) - len(raw) % (width * channels)
    return _decode_pcm(raw[:usable], width, channels), rate


def wav_bytes(samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> bytes:
    """Encode mono float samples in [-1, 1] as 16-bit PCM WAV."""
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())
    return buf.getvalue()


def write_wav(path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    atomic_write_bytes(path, wav_bytes(samples, sample_rate))


def resample_linear(x: np.ndarray, src_rate: int, dst_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Linear-interpolation resampling. No anti-alias filter; fine for speech-band content."""
    if src_rate == dst_rate:
        return np.asarray(x, dtype=np.float64)
    n_out = int(round(len(x) * dst_rate / src_rate))
    t_out = np.arange(n_out) * (src_rate / dst_rate)
    return np.interp(t_out, np.arange(len(x)), x)


def load_clip(record: SampleRecord | str | os.PathLike, root=None) -> AudioClip:
    """Decode a record's WAV to a mono 16 kHz clip (not yet normalised)."""
    if isinstance(record, SampleRecord):
        path = Path(record.path)
        label = record.label
    else:
        path, label = Path(record), None
    if root is not None and not path.is_absolute():
        path = Path(root) / path
    data, rate = read_wav(path)
    if rate <= 0:
        raise DataError(f"{path}: invalid sample rate {rate}")
    x = resample_linear(data.mean(axis=1), rate)
    if len(x) < MIN_SAMPLES:
        raise DataError(f"{path}: clip too short ({len(x)} samples at {SAMPLE_RATE} Hz, need {MIN_SAMPLES})")
    return AudioClip(x, SAMPLE_RATE, id=str(record.path if isinstance(record, SampleRecord) else path), label=label)


def normalize_peak(clip: AudioClip) -> AudioClip:
    """Scale so that max |sample| == 1."""
    x = np.asarray(clip.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError(f"clip {clip.id!r} contains non-finite samples")
    peak = np.max(np.abs(x)) if len(x) else 0.0
    if peak == 0:
        raise DataError(f"clip {clip.id!r} is silent; cannot peak-normalise")
    return AudioClip(x / peak, clip.sample_rate, clip.id, clip.label)
