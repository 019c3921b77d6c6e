"""Signal-processing primitives shared by the feature extractors.

All analysis runs on one fixed grid: 512-sample (32 ms) Hamming windows with a
160-sample (10 ms) hop at 16 kHz.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from . import SAMPLE_RATE
from .errors import DataError

WINDOW_LENGTH = 512
HOP_LENGTH = 160
N_FFT = 512
N_BINS = N_FFT // 2 + 1
BIN_WIDTH = SAMPLE_RATE / N_FFT  # 31.25 Hz
N_MELS = 26
N_CEPS = 25
LOG_FLOOR = 1e-10
PRE_EMPHASIS = 0.97


@dataclass(frozen=True)
class FrameGrid:
    window_length: int
    hop_length: int
    n_frames: int


@dataclass(frozen=True)
class Spectrum:
    magnitudes: np.ndarray
    phases: np.ndarray
    bin_width: float = BIN_WIDTH

    @property
    def power(self) -> np.ndarray:
        return self.magnitudes**2


@lru_cache(maxsize=None)
def hamming(n: int = WINDOW_LENGTH) -> np.ndarray:
    w = np.hamming(n)
    w.flags.writeable = False
    return w


def n_frames_for(n_samples: int) -> int:
    if n_samples < WINDOW_LENGTH:
        raise DataError(
            f"clip has {n_samples} samples; at least {WINDOW_LENGTH} are needed for one frame"
        )
    return (n_samples - WINDOW_LENGTH) // HOP_LENGTH + 1


def frame_signal(x: np.ndarray) -> tuple[np.ndarray, FrameGrid]:
    """Slice ``x`` into overlapping raw (unwindowed) frames, shape (n_frames, 512)."""
    x = np.asarray(x, dtype=np.float64)
    n = n_frames_for(len(x))
    idx = np.arange(WINDOW_LENGTH)[None, :] + HOP_LENGTH * np.arange(n)[:, None]
    return x[idx], FrameGrid(WINDOW_LENGTH, HOP_LENGTH, n)


def frame(x: np.ndarray) -> tuple[np.ndarray, FrameGrid]:
    """Hamming-windowed frames of ``x`` plus the grid they sit on."""
    raw, grid = frame_signal(x)
    return raw * hamming(), grid


def pre_emphasis(x: np.ndarray, coef: float = PRE_EMPHASIS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.empty_like(x)
    if len(x):
        y[0] = x[0]
        y[1:] = x[1:] - coef * x[:-1]
    return y


def fft_spectrum(frames: np.ndarray) -> Spectrum:
    """One-sided 512-point DFT. Works on a single frame or a (n, 512) stack."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] != N_FFT:
        raise DataError(f"frame length must be {N_FFT}, got {frames.shape[-1]}")
    X = np.fft.rfft(frames, n=N_FFT, axis=-1)
    return Spectrum(np.abs(X), np.angle(X))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(n_mels: int = N_MELS, fmin: float = 0.0, fmax: float = SAMPLE_RATE / 2) -> np.ndarray:
    """Triangular unit-peak filters on mel-spaced centres, shape (n_mels, 257).

    Weights are evaluated at the exact bin frequencies so filters stay
    non-degenerate even where mel spacing is narrower than a bin.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(N_BINS) * BIN_WIDTH
    fb = np.zeros((n_mels, N_BINS))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    fb.flags.writeable = False
    return fb


def mel_band_centers(n_mels: int = N_MELS) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(SAMPLE_RATE / 2), n_mels + 2))[1:-1]


def mel_energies(power: np.ndarray) -> np.ndarray:
    """Linear filterbank energies of a power spectrum (last axis = 257 bins)."""
    return np.asarray(power, dtype=np.float64) @ mel_filterbank().T


def mel_filterbank_energies(spec: Spectrum) -> np.ndarray:
    """Log mel energies (natural log, floored at 1e-10) of a spectrum."""
    return np.log(np.maximum(mel_energies(spec.power), LOG_FLOOR))


def dct_ii(values: np.ndarray, keep: int = N_CEPS) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, truncated to ``keep`` coefficients."""
    return dct(np.asarray(values, dtype=np.float64), type=2, norm="ortho", axis=-1)[..., :keep]


def normalized_autocorrelation(x: np.ndarray, min_lag: int, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation of ``x`` with its own lagged copy.

    Entry ``i`` corresponds to lag ``min_lag + i``; each lag is normalised by the
    energies of the two overlapping segments, so a periodic signal scores ~1 at
    its period regardless of the overlap length.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    max_lag = min(max_lag, n - 1)
    lags = np.arange(min_lag, max_lag + 1)
    # full autocorrelation via FFT, then per-lag segment energies from a cumsum
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    X = np.fft.rfft(x, nfft)
    r = np.fft.irfft(X * np.conj(X), nfft)[: max_lag + 1]
    c = np.concatenate(([0.0], np.cumsum(x * x)))
    head = c[n - lags]  # energy of x[0 : n-lag]
    tail = c[n] - c[lags]  # energy of x[lag : n]
    denom = np.sqrt(head * tail)
    out = np.zeros(len(lags))
    ok = denom > 0
    out[ok] = r[lags][ok] / denom[ok]
    return out
