"""Numeric primitives shared by every simulator module.

Complex channel coefficients are plain ``complex`` / ``numpy.complex128``
values; angles are radians everywhere and decibels appear only at the
input/output boundary.
"""
from __future__ import annotations

import hashlib
import math
from typing import Sequence

import numpy as np
import numpy.typing as npt

from ..errors import DomainError

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

_MASK64 = (1 << 64) - 1


def _label_word(label: int | str | float) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        return int(label) & _MASK64
    digest = hashlib.blake2b(repr(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's Philox generator, so the same key always replays the
    same sequence and distinct stream ids are independent. ``child`` derives
    a sub-stream from labels (ints or strings), which lets every trial of a
    sweep be reproduced in isolation regardless of execution order.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = (self.stream_id << 64) | self.seed
        self.rng = np.random.Generator(np.random.Philox(key=key))

    def child(self, *labels: int | str | float) -> RandomStream:
        words = (self.stream_id, *(_label_word(x) for x in labels))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=words)
        stream_id = int(seq.generate_state(1, dtype=np.uint64)[0])
        return RandomStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def db(power_ratio: float) -> float:
    if not power_ratio > 0:
        raise DomainError(f"db() needs a positive power ratio, got {power_ratio!r}")
    return 10.0 * math.log10(power_ratio)


def undb(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def amplitude_db(amplitude: float) -> float:
    """20·log10 of a magnitude (channel amplitude in dB)."""
    if not amplitude > 0:
        raise DomainError(f"amplitude_db() needs a positive magnitude, got {amplitude!r}")
    return 20.0 * math.log10(amplitude)


def wrap_phase(phase: float | FloatArray) -> float | FloatArray:
    """Map angles onto (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phase, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def circular_std(phases: Sequence[float] | FloatArray) -> float:
    """Circular standard deviation sqrt(-2 ln R) of phase samples.

    Returns ``inf`` when the mean resultant length vanishes.
    """
    values = np.asarray(phases, dtype=float)
    if values.size == 0:
        raise DomainError("circular_std() of an empty phase list")
    resultant = float(np.abs(np.mean(np.exp(1j * values))))
    if resultant <= 1e-15:
        return math.inf
    if resultant >= 1.0:
        return 0.0
    return math.sqrt(-2.0 * math.log(resultant))


def sample_complex_gaussian(
    stream: RandomStream,
    variance: float,
    size: int | tuple[int, ...] | None = None,
) -> complex | ComplexArray:
    """Draw CN(0, variance): independent real/imaginary parts of variance/2."""
    if variance < 0:
        raise DomainError(f"variance must be non-negative, got {variance!r}")
    scale = math.sqrt(variance / 2.0)
    parts = stream.rng.standard_normal(size=(2,) if size is None else (2, *np.atleast_1d(size)))
    samples = scale * (parts[0] + 1j * parts[1])
    if size is None:
        return complex(samples)
    return samples
