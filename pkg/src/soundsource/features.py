"""Per-frame acoustic features.

Each 10 ms frame yields a 68-slot vector:

    [0]      F0 in Hz (0 when unvoiced)
    [1]      voicing flag
    [2]      log energy
    [3]      H1-H2 (dB)
    [4]      peak slope
    [5:30]   MFCC 0-24
    [30:55]  HMPDM 0-24  (harmonic phase distortion, circular mean)
    [55:68]  HMPDD 0-12  (harmonic phase distortion, circular deviation)

H1-H2 and the HMPD slots are only defined on voiced frames and are zero elsewhere.
"""

from __future__ import annotations

import numpy as np

from . import SAMPLE_RATE
from .corpus import AudioClip
from .dsp import (
    BIN_WIDTH,
    LOG_FLOOR,
    N_BINS,
    N_CEPS,
    N_FFT,
    WINDOW_LENGTH,
    Spectrum,
    dct_ii,
    fft_spectrum,
    frame_signal,
    hamming,
    mel_filterbank_energies,
    normalized_autocorrelation,
    pre_emphasis,
)

F0_MIN = 50.0
F0_MAX = 500.0
VUV_THRESHOLD = 0.45
RMS_FLOOR = 1e-4
N_HMPDM = 25
N_HMPDD = 13
HMPD_CONTEXT = 2  # frames either side -> 5-frame window
PEAK_SLOPE_CENTERS = np.array([125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0])

F0, VUV, LOG_ENERGY, H1H2, PEAK_SLOPE = range(5)
MFCC = slice(5, 5 + N_CEPS)
HMPDM = slice(MFCC.stop, MFCC.stop + N_HMPDM)
HMPDD = slice(HMPDM.stop, HMPDM.stop + N_HMPDD)
N_FEATURES = HMPDD.stop  # 68

FEATURE_NAMES = (
    ["F0", "VUV", "LogEnergy", "H1H2", "PeakSlope"]
    + [f"MFCC{i}" for i in range(N_CEPS)]
    + [f"HMPDM{i}" for i in range(N_HMPDM)]
    + [f"HMPDD{i}" for i in range(N_HMPDD)]
)

# slots pooled over voiced frames only
VOICED_SLOTS = np.zeros(N_FEATURES, dtype=bool)
VOICED_SLOTS[[F0, H1H2]] = True
VOICED_SLOTS[HMPDM] = True
VOICED_SLOTS[HMPDD] = True

_MIN_LAG = int(np.ceil(SAMPLE_RATE / F0_MAX))  # 32
_MAX_LAG = int(np.floor(SAMPLE_RATE / F0_MIN))  # 320


def estimate_f0_vuv(frame: np.ndarray) -> tuple[float, int]:
    """Autocorrelation pitch for one raw (unwindowed) 512-sample frame.

    Picks the shortest-lag local maximum of the normalised autocorrelation
    that reaches 90% of the strongest one, which avoids period-doubling on
    clean periodic input, then refines it by parabolic interpolation.
    """
    x = np.asarray(frame, dtype=np.float64)
    x = x - x.mean()
    if np.sqrt(np.mean(x * x)) < RMS_FLOOR:
        return 0.0, 0
    r = normalized_autocorrelation(x, _MIN_LAG - 1, _MAX_LAG + 1)
    inner = np.arange(1, len(r) - 1)
    peaks = inner[(r[inner] > r[inner - 1]) & (r[inner] >= r[inner + 1])]
    if len(peaks) == 0:
        return 0.0, 0
    best = r[peaks].max()
    if best < VUV_THRESHOLD:
        return 0.0, 0
    i = peaks[np.argmax(r[peaks] >= max(0.9 * best, VUV_THRESHOLD))]
    a, b, c = r[i - 1], r[i], r[i + 1]
    denom = a - 2 * b + c
    delta = 0.5 * (a - c) / denom if denom < 0 else 0.0
    lag = (_MIN_LAG - 1) + i + delta
    f0 = float(np.clip(SAMPLE_RATE / lag, F0_MIN, F0_MAX))
    return f0, 1


def mfcc(frames: np.ndarray) -> np.ndarray:
    """MFCC 0-24 of pre-emphasised, windowed frame(s)."""
    return dct_ii(mel_filterbank_energies(fft_spectrum(frames)), keep=N_CEPS)


def _interpolated_peak(mag: np.ndarray, freq: float) -> float:
    """Largest magnitude within +-1 bin of ``freq``, refined by a log-parabola fit."""
    k0 = int(round(freq / BIN_WIDTH))
    lo, hi = max(k0 - 1, 0), min(k0 + 1, N_BINS - 1)
    k = lo + int(np.argmax(mag[lo : hi + 1]))
    peak = mag[k]
    if 0 < k < N_BINS - 1:
        a, b, c = np.log(np.maximum(mag[k - 1 : k + 2], 1e-300))
        denom = a - 2 * b + c
        if denom < 0:
            p = 0.5 * (a - c) / denom
            if abs(p) <= 0.5:
                peak = np.exp(b - 0.25 * (a - c) * p)
    return float(peak)


def h1h2(spec: Spectrum, f0: float) -> float:
    """Level difference in dB between the first two harmonics."""
    if f0 <= 0 or 2 * f0 > SAMPLE_RATE / 2:
        return 0.0
    mag = spec.magnitudes
    a1 = max(_interpolated_peak(mag, f0), 1e-12)
    a2 = max(_interpolated_peak(mag, 2 * f0), 1e-12)
    return float(20.0 * np.log10(a1 / a2))


def _octave_masks() -> np.ndarray:
    freqs = np.arange(N_BINS) * BIN_WIDTH
    masks = np.zeros((len(PEAK_SLOPE_CENTERS), N_BINS))
    for i, fc in enumerate(PEAK_SLOPE_CENTERS):
        band = (freqs >= fc / np.sqrt(2)) & (freqs < fc * np.sqrt(2))
        # equal noise gain per band: flat input gives equal band energy
        masks[i, band] = 1.0 / np.sqrt(band.sum())
    return masks


_OCTAVE_MASKS = _octave_masks()
_LOG2_CENTERS = np.log2(PEAK_SLOPE_CENTERS)


def peak_slope(frames: np.ndarray) -> np.ndarray | float:
    """Spectral tilt from octave-band peak amplitudes.

    Each windowed frame is split into six octave bands (125 Hz to 4 kHz); the
    slope of log10(band peak) against log2(centre frequency) is returned.
    Silent frames give 0.
    """
    frames = np.asarray(frames, dtype=np.float64)
    single = frames.ndim == 1
    frames = np.atleast_2d(frames)
    X = np.fft.rfft(frames, N_FFT, axis=-1)
    bands = np.fft.irfft(X[:, None, :] * _OCTAVE_MASKS[None], N_FFT, axis=-1)
    peaks = np.abs(bands).max(axis=-1)
    logp = np.log10(np.maximum(peaks, LOG_FLOOR))
    xc = _LOG2_CENTERS - _LOG2_CENTERS.mean()
    slope = (logp - logp.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
    slope[peaks.max(axis=1) == 0] = 0.0
    return float(slope[0]) if single else slope


def _wrap(phi):
    return np.angle(np.exp(1j * phi))


def harmonic_phases(frame: np.ndarray, f0: float, n_harmonics: int) -> np.ndarray:
    """Phase of each harmonic k*f0 (k = 1..n) of a windowed frame, referenced to the frame centre."""
    n = np.arange(len(frame)) - (len(frame) - 1) / 2.0
    f = f0 * np.arange(1, n_harmonics + 1)
    basis = np.exp(-2j * np.pi * np.outer(f, n) / SAMPLE_RATE)
    return np.angle(basis @ frame)


def phase_distortion(frames: np.ndarray, f0_track: np.ndarray) -> np.ndarray:
    """Per-frame relative harmonic phase, shape (n_frames, 25); NaN where undefined.

    Slot j holds wrap(phi[j+2] - phi[j+1] - phi[1]) with phi[k] the phase of
    harmonic k. The linear-phase term cancels, so the value does not depend
    on where the frame starts within the period.
    """
    pd = np.full((len(frames), N_HMPDM), np.nan)
    for t, f0 in enumerate(f0_track):
        if f0 <= 0:
            continue
        n_harm = min(N_HMPDM + 1, int(np.floor(SAMPLE_RATE / 2 / f0)))
        if n_harm < 2:
            continue
        phi = harmonic_phases(frames[t], f0, n_harm)
        pd[t, : n_harm - 1] = _wrap(phi[1:] - phi[:-1] - phi[0])
    return pd


def hmpd(frames: np.ndarray, f0_track: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """HMPDM (n, 25) and HMPDD (n, 13) over a centred 5-frame window.

    ``frames`` are Hamming-windowed frames; ``f0_track`` is 0 on unvoiced frames.
    """
    f0_track = np.asarray(f0_track, dtype=np.float64)
    n = len(f0_track)
    pd = phase_distortion(frames, f0_track)
    z = np.exp(1j * np.nan_to_num(pd))
    valid = ~np.isnan(pd)
    z[~valid] = 0.0
    # windowed sums via cumulative sums over frames
    zc = np.vstack([np.zeros((1, N_HMPDM)), np.cumsum(z, axis=0)])
    vc = np.vstack([np.zeros((1, N_HMPDM)), np.cumsum(valid, axis=0)])
    lo = np.clip(np.arange(n) - HMPD_CONTEXT, 0, n)
    hi = np.clip(np.arange(n) + HMPD_CONTEXT + 1, 0, n)
    zsum = zc[hi] - zc[lo]
    count = vc[hi] - vc[lo]
    ok = valid & (count > 0)
    mean = np.zeros((n, N_HMPDM), dtype=complex)
    np.divide(zsum, count, out=mean, where=ok)
    hmpdm = np.where(ok, np.angle(mean), 0.0)
    R = np.clip(np.abs(mean[:, :N_HMPDD]), 1e-12, 1.0)
    hmpdd = np.where(ok[:, :N_HMPDD], np.sqrt(-2.0 * np.log(R)), 0.0)
    return hmpdm, hmpdd


def extract_frame_features(clip: AudioClip | np.ndarray) -> np.ndarray:
    """Frame feature matrix of shape (n_frames, 68) for a 16 kHz clip."""
    x = clip.samples if isinstance(clip, AudioClip) else clip
    x = np.asarray(x, dtype=np.float64)
    raw, grid = frame_signal(x)
    win = hamming()
    windowed = raw * win
    emphasized = frame_signal(pre_emphasis(x))[0] * win

    out = np.zeros((grid.n_frames, N_FEATURES))
    pitch = np.array([estimate_f0_vuv(f) for f in raw])
    out[:, F0] = pitch[:, 0]
    out[:, VUV] = pitch[:, 1]
    out[:, LOG_ENERGY] = np.log(np.maximum(np.sum(raw * raw, axis=1), LOG_FLOOR))
    spec = fft_spectrum(windowed)
    for t in np.flatnonzero(pitch[:, 1]):
        out[t, H1H2] = h1h2(Spectrum(spec.magnitudes[t], spec.phases[t]), pitch[t, 0])
    out[:, PEAK_SLOPE] = peak_slope(windowed)
    out[:, MFCC] = mfcc(emphasized)
    out[:, HMPDM], out[:, HMPDD] = hmpd(windowed, out[:, F0])
    return out


def frame_features_csv(clip_id: str, feats: np.ndarray) -> str:
    """CSV rows ``clip_id,frame,<68 features>`` with a header line."""
    lines = [",".join(["clip_id", "frame"] + FEATURE_NAMES)]
    for i, row in enumerate(feats):
        lines.append(",".join([clip_id, str(i)] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


assert len(FEATURE_NAMES) == N_FEATURES == 68
assert WINDOW_LENGTH == N_FFT
