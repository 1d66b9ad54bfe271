"""Magnitude spectrograms of channel time series.

The STFT frames a real series with a periodic Hann window and keeps the
one-sided magnitude, DC bin included. With ``detrend`` each frame has its
mean removed first, so slow level changes do not leak into the low bins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

from ..battle.engine import register_evaluation
from ..errors import ContractError, DomainError
from ..physics.mathcore import ComplexArray, FloatArray

DEFAULT_SAMPLE_RATE = 100.0


@dataclass(frozen=True)
class StftParams:
    window: int = 64
    hop: int = 16
    nfft: int | None = None
    sample_rate: float = DEFAULT_SAMPLE_RATE
    detrend: bool = False

    def __post_init__(self) -> None:
        if self.window < 2 or self.hop < 1:
            raise DomainError("STFT window must be >= 2 and hop >= 1")
        if self.nfft is not None and self.nfft < self.window:
            raise DomainError("nfft must be at least the window length")
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be positive")

    @property
    def fft_size(self) -> int:
        return self.nfft or self.window

    @property
    def frequencies(self) -> FloatArray:
        return np.fft.rfftfreq(self.fft_size, d=1.0 / self.sample_rate)

    def frame_count(self, length: int) -> int:
        if length < self.window:
            raise DomainError(f"series of {length} samples is shorter than the {self.window}-sample window")
        return 1 + (length - self.window) // self.hop


@dataclass(frozen=True, eq=False)
class SpectrogramTarget:
    """Magnitude STFT, one row per frame and one column per frequency bin."""

    magnitude: FloatArray
    params: StftParams = field(default_factory=StftParams)

    def __post_init__(self) -> None:
        mag = np.asarray(self.magnitude, dtype=float)
        if mag.ndim != 2 or mag.shape[1] != self.params.fft_size // 2 + 1:
            raise ContractError(f"spectrogram matrix of shape {mag.shape} does not match nfft={self.params.fft_size}")
        if np.any(mag < 0):
            raise DomainError("spectrogram magnitudes must be non-negative")
        object.__setattr__(self, "magnitude", mag)

    @property
    def frames(self) -> int:
        return self.magnitude.shape[0]

    @property
    def times(self) -> FloatArray:
        p = self.params
        return (np.arange(self.frames) * p.hop + p.window / 2) / p.sample_rate

    @property
    def frequencies(self) -> FloatArray:
        return self.params.frequencies

    @property
    def silent(self) -> bool:
        return not np.any(self.magnitude)


def _frames(series: Sequence[float] | FloatArray, params: StftParams) -> FloatArray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ContractError("spectrogram input must be a 1-D series")
    count = params.frame_count(x.size)
    index = np.arange(params.window)[None, :] + params.hop * np.arange(count)[:, None]
    frames = x[index]
    if params.detrend:
        frames = frames - frames.mean(axis=1, keepdims=True)
        # exact zeros for flat frames; the mean of equal floats may round
        frames[np.ptp(x[index], axis=1) == 0] = 0.0
    return frames * signal.get_window("hann", params.window)


def stft(series: Sequence[float] | FloatArray, params: StftParams | None = None) -> ComplexArray:
    params = params or StftParams()
    return np.fft.rfft(_frames(series, params), n=params.fft_size, axis=1)


def spectrogram(series: Sequence[float] | FloatArray, params: StftParams | None = None) -> SpectrogramTarget:
    params = params or StftParams()
    return SpectrogramTarget(magnitude=np.abs(stft(series, params)), params=params)


def _bin_weights(params: StftParams) -> FloatArray:
    n = params.fft_size
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return weights / n


def spectrogram_energy(target: SpectrogramTarget) -> float:
    """Time-domain energy of the windowed frames, recovered from the one-sided bins."""
    return float(np.sum((target.magnitude**2) @ _bin_weights(target.params)))


def windowed_energy(series: Sequence[float] | FloatArray, params: StftParams | None = None) -> float:
    return float(np.sum(_frames(series, params or StftParams()) ** 2))


def column_energy(target: SpectrogramTarget) -> FloatArray:
    """Per-bin energy summed over frames."""
    return (target.magnitude**2 * _bin_weights(target.params)).sum(axis=0)


def similarity(first: SpectrogramTarget, second: SpectrogramTarget) -> float:
    """Zero-lag normalized 2-D correlation of two magnitude spectrograms.

    Two silent spectrograms match perfectly; a silent one matches nothing.
    """
    a, b = first.magnitude, second.magnitude
    if a.shape != b.shape:
        raise ContractError(f"spectrogram shapes differ: {a.shape} vs {b.shape}")
    norm_a, norm_b = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if norm_a == 0.0 and norm_b == 0.0:
        return 1.0
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.sum(a * b) / (norm_a * norm_b))


def peak_frequency_track(target: SpectrogramTarget) -> FloatArray:
    """Strongest non-DC frequency per frame, refined by parabolic interpolation; 0 for silent frames."""
    mag = target.magnitude
    params = target.params
    resolution = params.sample_rate / params.fft_size
    track = np.zeros(target.frames)
    if mag.shape[1] < 3:
        return track
    for i, row in enumerate(mag):
        if not np.any(row[1:]):
            continue
        k = 1 + int(np.argmax(row[1:]))
        offset = 0.0
        if 1 < k < row.size - 1:
            left, centre, right = (math.log(max(v, 1e-300)) for v in row[k - 1 : k + 2])
            denom = left - 2.0 * centre + right
            if denom < 0:
                offset = 0.5 * (left - right) / denom
        track[i] = (k + offset) * resolution
    return track


def toggle_from_track(track: FloatArray, params: StftParams, length: int) -> np.ndarray:
    """Binary toggle sequence whose fundamental follows a per-frame frequency track."""
    if track.size == 0:
        return np.ones(length, dtype=np.int8)
    centres = np.arange(track.size) * params.hop + params.window / 2
    inst = np.interp(np.arange(length), centres, track)
    phase = 2.0 * math.pi * np.cumsum(inst) / params.sample_rate
    return (np.cos(phase) >= 0).astype(np.int8)


def square_toggle_series(length: int, frequency: float, sample_rate: float = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """0/1 square wave at ``frequency``: the switching pattern of a two-state surface."""
    t = np.arange(length) / sample_rate
    return (np.cos(2.0 * math.pi * frequency * t) >= 0).astype(np.int8)


def doppler_ramp_series(
    length: int,
    f_start: float = 4.0,
    f_end: float = 8.0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> FloatArray:
    """Linear chirp from ``f_start`` to ``f_end``, a walking-like Doppler signature."""
    t = np.arange(length) / sample_rate
    duration = max(length / sample_rate, 1.0 / sample_rate)
    rate = (f_end - f_start) / duration
    return np.cos(2.0 * math.pi * (f_start * t + 0.5 * rate * t**2))


def doppler_band_energy(target: SpectrogramTarget) -> float:
    """Spectrogram energy outside the DC bin."""
    return float(np.sum(column_energy(target)[1:]))


def _doppler_energy(values: ComplexArray) -> float:
    mags = np.abs(values)
    if mags.size < 4:
        return 0.0
    window = min(64, mags.size)
    return doppler_band_energy(spectrogram(mags, StftParams(window=window, hop=max(1, window // 4), detrend=True)))


def use_spectrogram_target(target: SpectrogramTarget) -> None:
    """Register ``spectrogram_match``: similarity of the observed |H| window to ``target``.

    The evaluation window must span exactly the samples the target was built from.
    """

    def match(values: ComplexArray) -> float:
        mags = np.abs(values)
        if mags.size < target.params.window:
            return 0.0
        observed = spectrogram(mags, target.params)
        if observed.frames != target.frames:
            return 0.0
        return similarity(observed, target)

    register_evaluation("spectrogram_match", match)


register_evaluation("doppler_energy", _doppler_energy)
