"""Seeded synthetic wake-word corpus with per-class playback colouration.

A clip is a jittered harmonic source pushed through two fixed formant
resonators. Playback classes then pass through a channel model:

    high-pass -> low-pass -> y = x - g*x**3 -> noise-tail reverb -> white noise -> peak renorm

Stages with neutral parameters (high-pass <= 1 Hz, low-pass >= Nyquist,
g = 0, rt60 = 0, snr = inf) are bypassed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import LABELS, PLAYBACK_LABELS, SAMPLE_RATE
from .corpus import AudioClip, CorpusManifest, SampleRecord, normalize_peak, write_manifest, write_wav
from .errors import DataError

NYQUIST = SAMPLE_RATE / 2
FORMANTS = ((700.0, 100.0), (1200.0, 100.0))
JITTER_STEP = 160  # samples (10 ms)


@dataclass(frozen=True)
class ChannelProfile:
    highpass_cutoff: float = 1.0
    lowpass_cutoff: float = NYQUIST
    nonlinearity_gain: float = 0.0
    reverb_rt60: float = 0.0
    noise_snr: float = math.inf

    def validate(self) -> "ChannelProfile":
        if not (0 < self.highpass_cutoff < self.lowpass_cutoff <= NYQUIST):
            raise DataError(f"need 0 < highpass_cutoff < lowpass_cutoff <= {NYQUIST:g} Hz: {self}")
        if self.nonlinearity_gain < 0 or self.reverb_rt60 < 0 or not self.noise_snr > 0:
            raise DataError(f"need nonlinearity_gain >= 0, reverb_rt60 >= 0, noise_snr > 0: {self}")
        return self


def default_profiles() -> dict[str, ChannelProfile]:
    room = dict(reverb_rt60=0.15, noise_snr=35.0)
    return {
        "human": ChannelProfile(**room),
        "headphone": ChannelProfile(highpass_cutoff=300.0, **room),
        "ipod": ChannelProfile(highpass_cutoff=200.0, nonlinearity_gain=0.2, **room),
        "loudspeaker": ChannelProfile(lowpass_cutoff=4000.0, nonlinearity_gain=0.4, reverb_rt60=0.4, noise_snr=35.0),
    }


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int = 60
    seed: int = 42
    f0_range: tuple[float, float] = (90.0, 250.0)
    duration_range: tuple[float, float] = (0.6, 1.0)
    profiles: dict[str, ChannelProfile] = field(default_factory=default_profiles)

    def validate(self) -> "SynthSpec":
        lo, hi = self.f0_range
        if self.n_per_class < 1:
            raise DataError("n_per_class must be >= 1")
        if not 60 <= lo <= hi <= 400:
            raise DataError(f"f0_range must lie within [60, 400] Hz, got {self.f0_range}")
        dlo, dhi = self.duration_range
        if not 0.4 <= dlo <= dhi <= 2.0:
            raise DataError(f"duration_range must lie within [0.4, 2.0] s, got {self.duration_range}")
        missing = [lab for lab in LABELS if lab not in self.profiles]
        if missing:
            raise DataError(f"missing channel profile(s): {', '.join(missing)}")
        for p in self.profiles.values():
            p.validate()
        h = self.profiles["human"]
        if h.highpass_cutoff > 1.0 or h.lowpass_cutoff < NYQUIST or h.nonlinearity_gain != 0:
            raise DataError("the human profile may only use reverb and noise")
        return self


def _resonator(freq: float, bandwidth: float):
    r = math.exp(-math.pi * bandwidth / SAMPLE_RATE)
    theta = 2 * math.pi * freq / SAMPLE_RATE
    a = [1.0, -2 * r * math.cos(theta), r * r]
    # unit gain at the centre frequency
    gain = abs(np.polyval(a[::-1], np.exp(-1j * theta)))
    return [gain], a


def synth_voice(
    rng: np.random.Generator,
    f0: float,
    duration: float,
    jitter: float = 0.02,
    noise_db: float = -30.0,
    clip_id: str = "",
) -> AudioClip:
    """Voice-like vowel: 1/k harmonic source, two formants, aspiration noise, peak 1."""
    n = int(round(duration * SAMPLE_RATE))
    n_steps = -(-n // JITTER_STEP)
    factors = 1.0 + (rng.uniform(-jitter, jitter, n_steps) if jitter > 0 else np.zeros(n_steps))
    if jitter > 0:
        inst = np.repeat(f0 * factors, JITTER_STEP)[:n]
        phase = 2 * np.pi * np.concatenate(([0.0], np.cumsum(inst[:-1]))) / SAMPLE_RATE
    else:
        phase = 2 * np.pi * f0 * np.arange(n) / SAMPLE_RATE
    top = f0 * (1 + jitter)
    n_harm = int(NYQUIST // top) if top < NYQUIST else 1
    x = np.zeros(n)
    for k in range(1, max(n_harm, 1) + 1):
        x += np.sin(k * phase) / k
    for freq, bw in FORMANTS:
        b, a = _resonator(freq, bw)
        x = signal.lfilter(b, a, x)
    if np.isfinite(noise_db):
        rms = np.sqrt(np.mean(x * x))
        x = x + rng.standard_normal(n) * rms * 10 ** (noise_db / 20)
    # 30 ms raised-cosine onset/offset
    ramp = min(int(0.03 * SAMPLE_RATE), n // 2)
    if ramp > 0:
        env = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        x[:ramp] *= env
        x[n - ramp :] *= env[::-1]
    return normalize_peak(AudioClip(x, SAMPLE_RATE, clip_id))


def apply_channel(clip: AudioClip, profile: ChannelProfile, rng: np.random.Generator) -> AudioClip:
    """Colour a clip with a playback-channel model; output is re-normalised to peak 1."""
    profile.validate()
    if clip.sample_rate != SAMPLE_RATE:
        raise DataError(f"channel model expects {SAMPLE_RATE} Hz input")
    x = np.asarray(clip.samples, dtype=np.float64)
    if profile.highpass_cutoff > 1.0:
        sos = signal.butter(2, profile.highpass_cutoff, "highpass", fs=SAMPLE_RATE, output="sos")
        x = signal.sosfilt(sos, x)
    if profile.lowpass_cutoff < NYQUIST:
        sos = signal.butter(2, profile.lowpass_cutoff, "lowpass", fs=SAMPLE_RATE, output="sos")
        x = signal.sosfilt(sos, x)
    if profile.nonlinearity_gain > 0:
        x = np.clip(x - profile.nonlinearity_gain * x**3, -1.0, 1.0)
    if profile.reverb_rt60 > 0:
        x = signal.fftconvolve(x, reverb_tail(profile.reverb_rt60, rng))[: len(x)]
    if np.isfinite(profile.noise_snr):
        rms = np.sqrt(np.mean(x * x))
        x = x + rng.standard_normal(len(x)) * rms * 10 ** (-profile.noise_snr / 20)
    return normalize_peak(AudioClip(x, clip.sample_rate, clip.id, clip.label))


def reverb_tail(rt60: float, rng: np.random.Generator) -> np.ndarray:
    """Unit direct path followed by Gaussian noise decaying 60 dB over ``rt60`` seconds."""
    n = max(int(rt60 * SAMPLE_RATE), 2)
    t = np.arange(n) / SAMPLE_RATE
    h = rng.standard_normal(n) * 10 ** (-3 * t / rt60)
    h[0] = 0.0
    # tail energy relative to the direct sound; keeps the dry signal dominant
    h *= 0.5 / np.sqrt(np.sum(h * h))
    h[0] = 1.0
    return h


def generate_corpus(spec: SynthSpec, out_dir) -> CorpusManifest:
    """Write ``n_per_class`` WAVs per label plus ``manifest.csv`` into ``out_dir``."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = np.random.SeedSequence(spec.seed).spawn(len(LABELS) * spec.n_per_class)
    records = []
    for c, label in enumerate(LABELS):
        for i in range(spec.n_per_class):
            rng = np.random.default_rng(streams[c * spec.n_per_class + i])
            f0 = rng.uniform(*spec.f0_range)
            dur = rng.uniform(*spec.duration_range)
            name = f"{label}_{i:04d}.wav"
            clip = synth_voice(rng, f0, dur, clip_id=name)
            clip = apply_channel(clip, spec.profiles[label], rng)
            write_wav(out_dir / name, clip.samples)
            records.append(
                SampleRecord(
                    path=name,
                    label=label,
                    position=f"P{1 + i % 22}",
                    direction=str(1 + i % 5),
                    environment="synthetic",
                    device=label if label in PLAYBACK_LABELS else "live",
                )
            )
    write_manifest(out_dir / "manifest.csv", records)
    return CorpusManifest(tuple(records), out_dir)


# --- spec file: one `key = value` per line, '#' comments ---------------------------

_PROFILE_KEYS = tuple(f.name for f in fields(ChannelProfile))


def parse_synth_spec(text: str) -> SynthSpec:
    spec = SynthSpec()
    top: dict = {}
    profiles = dict(spec.profiles)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"synth spec line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if "." in key:
                label, pkey = key.split(".", 1)
                if label not in LABELS or pkey not in _PROFILE_KEYS:
                    raise KeyError(key)
                profiles[label] = replace(profiles[label], **{pkey: float(value)})
            elif key in ("n_per_class", "seed"):
                top[key] = int(value)
            elif key in ("f0_min", "f0_max", "duration_min", "duration_max"):
                top[key] = float(value)
            else:
                raise KeyError(key)
        except KeyError:
            raise DataError(f"synth spec line {lineno}: unknown key {key!r}") from None
        except ValueError:
            raise DataError(f"synth spec line {lineno}: bad value {value!r} for {key}") from None
    f0 = (top.pop("f0_min", spec.f0_range[0]), top.pop("f0_max", spec.f0_range[1]))
    dur = (top.pop("duration_min", spec.duration_range[0]), top.pop("duration_max", spec.duration_range[1]))
    return SynthSpec(f0_range=f0, duration_range=dur, profiles=profiles, **top).validate()


def format_synth_spec(spec: SynthSpec) -> str:
    lines = [
        f"n_per_class = {spec.n_per_class}",
        f"seed = {spec.seed}",
        f"f0_min = {spec.f0_range[0]!r}",
        f"f0_max = {spec.f0_range[1]!r}",
        f"duration_min = {spec.duration_range[0]!r}",
        f"duration_max = {spec.duration_range[1]!r}",
    ]
    for label in LABELS:
        p = spec.profiles[label]
        lines += [f"{label}.{k} = {getattr(p, k)!r}" for k in _PROFILE_KEYS]
    return "\n".join(lines) + "\n"
