from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import numpy.typing as npt

from ..errors import ContractError, DomainError, UnsupportedOperationError
from .mathcore import ComplexArray, RandomStream

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

BINARY_STATES: tuple[float, ...] = (0.0, math.pi)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MetasurfaceSpec:
    """Element count, phase alphabet and which elements may be programmed.

    Inactive elements stay on the surface, frozen to ``frozen_states``.
    """

    element_count: int
    phase_states: tuple[float, ...] = BINARY_STATES
    active_mask: BoolArray | None = None
    frozen_states: IntArray | None = None

    def __post_init__(self) -> None:
        if self.element_count < 0:
            raise DomainError(f"element_count must be >= 0, got {self.element_count}")
        states = tuple(float(p) for p in self.phase_states)
        if len(states) < 2:
            raise DomainError("a metasurface needs at least two phase states")
        mask = (
            np.ones(self.element_count, dtype=bool)
            if self.active_mask is None
            else np.array(self.active_mask, dtype=bool)
        )
        frozen = (
            np.zeros(self.element_count, dtype=np.int64)
            if self.frozen_states is None
            else np.array(self.frozen_states, dtype=np.int64)
        )
        if mask.shape != (self.element_count,) or frozen.shape != (self.element_count,):
            raise ContractError("active_mask and frozen_states must have length element_count")
        if frozen.size and (frozen.min() < 0 or frozen.max() >= len(states)):
            raise DomainError("frozen state index outside the phase alphabet")
        object.__setattr__(self, "phase_states", states)
        object.__setattr__(self, "active_mask", _readonly(mask))
        object.__setattr__(self, "frozen_states", _readonly(frozen))

    @classmethod
    def binary(cls, element_count: int = 256) -> MetasurfaceSpec:
        return cls(element_count=element_count)

    @classmethod
    def grid(cls, rows: int = 16, cols: int = 16, phase_bits: int = 1) -> MetasurfaceSpec:
        return cls.uniform(rows * cols, 2**phase_bits)

    @classmethod
    def uniform(cls, element_count: int, n_states: int = 256) -> MetasurfaceSpec:
        """Evenly spaced phase alphabet; large ``n_states`` stands in for continuous shifting."""
        states = tuple(2.0 * math.pi * k / n_states for k in range(n_states))
        if n_states == 2:
            states = BINARY_STATES
        return cls(element_count=element_count, phase_states=states)

    @property
    def n_states(self) -> int:
        return len(self.phase_states)

    @property
    def is_binary(self) -> bool:
        return self.n_states == 2

    @cached_property
    def active_indices(self) -> IntArray:
        return _readonly(np.flatnonzero(self.active_mask).astype(np.int64))

    @property
    def active_count(self) -> int:
        return int(self.active_indices.size)

    @property
    def free_space_size(self) -> int:
        return self.n_states**self.active_count

    @cached_property
    def coefficient_table(self) -> ComplexArray:
        phases = np.asarray(self.phase_states)
        re, im = np.cos(phases), np.sin(phases)
        re[np.abs(re) < 1e-12] = 0.0
        im[np.abs(im) < 1e-12] = 0.0
        return _readonly(re + 1j * im)


@dataclass(frozen=True, eq=False)
class SurfaceConfig:
    state_indices: IntArray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        states = np.array(self.state_indices, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "state_indices", _readonly(states))

    def __len__(self) -> int:
        return int(self.state_indices.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SurfaceConfig):
            return NotImplemented
        return np.array_equal(self.state_indices, other.state_indices)

    def __hash__(self) -> int:
        return hash(self.state_indices.tobytes())

    def with_states(self, positions: Sequence[int] | IntArray, states: Sequence[int] | IntArray) -> SurfaceConfig:
        updated = self.state_indices.copy()
        updated[np.asarray(positions, dtype=np.int64)] = states
        return SurfaceConfig(updated)

    def differing_positions(self, other: SurfaceConfig) -> IntArray:
        return np.flatnonzero(self.state_indices != other.state_indices)

    def hex(self) -> str:
        """Bit-packed hex string; only meaningful for binary surfaces."""
        if self.state_indices.size and self.state_indices.max() > 1:
            raise UnsupportedOperationError("hex packing needs a binary configuration")
        return np.packbits(self.state_indices.astype(np.uint8)).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, length: int) -> SurfaceConfig:
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
        return cls(bits[:length])

    def serialize(self, spec: MetasurfaceSpec) -> str:
        if spec.is_binary:
            return self.hex()
        return " ".join(str(int(s)) for s in self.state_indices)

    def digest(self) -> str:
        return hashlib.blake2b(self.state_indices.tobytes(), digest_size=6).hexdigest()


def check_config(spec: MetasurfaceSpec, config: SurfaceConfig) -> None:
    if len(config) != spec.element_count:
        raise ContractError(
            f"configuration has {len(config)} elements, surface has {spec.element_count}"
        )
    states = config.state_indices
    if states.size and (states.min() < 0 or states.max() >= spec.n_states):
        raise ContractError("configuration uses a state outside the phase alphabet")
    inactive = ~spec.active_mask
    if not np.array_equal(states[inactive], spec.frozen_states[inactive]):
        raise ContractError("inactive elements must keep their frozen states")


def reflection_coefficients(spec: MetasurfaceSpec, config: SurfaceConfig) -> ComplexArray:
    if len(config) != spec.element_count:
        raise ContractError(
            f"configuration has {len(config)} elements, surface has {spec.element_count}"
        )
    return spec.coefficient_table[config.state_indices]


def initial_config(spec: MetasurfaceSpec) -> SurfaceConfig:
    """All active elements in state 0, inactive ones frozen."""
    states = np.where(spec.active_mask, 0, spec.frozen_states)
    return SurfaceConfig(states)


def random_config(spec: MetasurfaceSpec, stream: RandomStream) -> SurfaceConfig:
    states = np.array(spec.frozen_states, dtype=np.int64)
    states[spec.active_indices] = stream.rng.integers(0, spec.n_states, size=spec.active_count)
    return SurfaceConfig(states)


def random_configs(spec: MetasurfaceSpec, count: int, stream: RandomStream) -> IntArray:
    """``count`` random configurations as a (count, L) state matrix."""
    states = np.tile(spec.frozen_states, (count, 1))
    states[:, spec.active_indices] = stream.rng.integers(
        0, spec.n_states, size=(count, spec.active_count)
    )
    return states


def invert(spec: MetasurfaceSpec, config: SurfaceConfig) -> SurfaceConfig:
    if not spec.is_binary:
        raise UnsupportedOperationError("configuration inversion needs a binary surface")
    states = config.state_indices.copy()
    active = spec.active_indices
    states[active] = 1 - states[active]
    return SurfaceConfig(states)


def mask_random_elements(
    spec: MetasurfaceSpec, inactive_count: int, stream: RandomStream
) -> MetasurfaceSpec:
    """Deactivate ``inactive_count`` uniformly chosen elements, frozen to random states."""
    if not 0 <= inactive_count <= spec.element_count:
        raise DomainError(
            f"inactive_count must lie in [0, {spec.element_count}], got {inactive_count}"
        )
    positions = stream.rng.choice(spec.element_count, size=inactive_count, replace=False)
    mask = np.ones(spec.element_count, dtype=bool)
    mask[positions] = False
    frozen = np.zeros(spec.element_count, dtype=np.int64)
    frozen[positions] = stream.rng.integers(0, spec.n_states, size=inactive_count)
    logger.debug("Masked %d of %d elements", inactive_count, spec.element_count)
    return MetasurfaceSpec(
        element_count=spec.element_count,
        phase_states=spec.phase_states,
        active_mask=mask,
        frozen_states=frozen,
    )


def with_active_count(spec: MetasurfaceSpec, active_count: int, stream: RandomStream) -> MetasurfaceSpec:
    return mask_random_elements(spec, spec.element_count - active_count, stream)
