"""Effective channel composition.

H_eff = H_d + sum_l h^A_l c^A_l g^A_l + sum_l h^B_l c^B_l g^B_l + coupling,
where the coupling term is the double bounce through both surfaces in each
direction. Single evaluations and batched evaluation over many
configuration pairs share the same arithmetic.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ContractError, DomainError, UnsupportedOperationError
from .environment import (
    DirectChannel,
    Environment,
    MotionSample,
    SubchannelSet,
    synthesize_coupling,
    synthesize_direct_channel,
    synthesize_subchannels,
)
from .mathcore import ComplexArray, RandomStream, sample_complex_gaussian
from .metasurface import IntArray, MetasurfaceSpec, SurfaceConfig, random_configs, reflection_coefficients

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    direct: DirectChannel
    sub_a: SubchannelSet = field(default_factory=SubchannelSet.empty)
    sub_b: SubchannelSet = field(default_factory=SubchannelSet.empty)
    spec_a: MetasurfaceSpec | None = None
    spec_b: MetasurfaceSpec | None = None
    coupling: ComplexArray | None = None

    def __post_init__(self) -> None:
        if self.spec_a is None:
            object.__setattr__(self, "spec_a", MetasurfaceSpec.binary(len(self.sub_a)))
        if self.spec_b is None:
            object.__setattr__(self, "spec_b", MetasurfaceSpec.binary(len(self.sub_b)))
        if self.spec_a.element_count != len(self.sub_a) or self.spec_b.element_count != len(self.sub_b):
            raise ContractError("surface specs and sub-channel sets disagree on element count")
        if self.coupling is not None:
            t = np.asarray(self.coupling, dtype=np.complex128)
            if t.shape != (len(self.sub_a), len(self.sub_b)):
                raise ContractError(
                    f"coupling matrix must be {len(self.sub_a)}x{len(self.sub_b)}, got {t.shape}"
                )
            if not np.all(np.isfinite(t)):
                raise DomainError("coupling coefficients must be finite")
            t.setflags(write=False)
            object.__setattr__(self, "coupling", t)

    @classmethod
    def from_arrays(
        cls,
        h_d: complex,
        a_h: Any = (),
        a_g: Any = (),
        b_h: Any = (),
        b_g: Any = (),
        coupling: Any = None,
        spec_a: MetasurfaceSpec | None = None,
        spec_b: MetasurfaceSpec | None = None,
    ) -> ChannelModel:
        return cls(
            direct=DirectChannel(h_d),
            sub_a=SubchannelSet(np.asarray(a_h, dtype=complex), np.asarray(a_g, dtype=complex)),
            sub_b=SubchannelSet(np.asarray(b_h, dtype=complex), np.asarray(b_g, dtype=complex)),
            spec_a=spec_a,
            spec_b=spec_b,
            coupling=None if coupling is None else np.asarray(coupling, dtype=complex),
        )

    @property
    def h_d(self) -> complex:
        return self.direct.value

    @cached_property
    def combined_a(self) -> ComplexArray:
        return self.sub_a.combined

    @cached_property
    def combined_b(self) -> ComplexArray:
        return self.sub_b.combined

    def spec(self, party: str) -> MetasurfaceSpec:
        return self.spec_a if party == "A" else self.spec_b

    def sub(self, party: str) -> SubchannelSet:
        return self.sub_a if party == "A" else self.sub_b

    def without_coupling(self) -> ChannelModel:
        return ChannelModel(self.direct, self.sub_a, self.sub_b, self.spec_a, self.spec_b, None)

    def with_specs(self, spec_a: MetasurfaceSpec, spec_b: MetasurfaceSpec) -> ChannelModel:
        return ChannelModel(self.direct, self.sub_a, self.sub_b, spec_a, spec_b, self.coupling)

    def with_direct(self, value: complex) -> ChannelModel:
        return ChannelModel(DirectChannel(value), self.sub_a, self.sub_b, self.spec_a, self.spec_b, self.coupling)

    def perturbed(self, sample: MotionSample) -> ChannelModel:
        """Apply one motion sample: scaled direct path, additive receive-hop terms."""

        def bump(sub: SubchannelSet, delta: ComplexArray) -> SubchannelSet:
            if len(sub) == 0:
                return sub
            rms = math.sqrt(float(np.mean(np.abs(sub.g) ** 2)))
            return SubchannelSet(sub.h, sub.g + delta * rms)

        return ChannelModel(
            DirectChannel(self.h_d * sample.direct_factor),
            bump(self.sub_a, sample.delta_a),
            bump(self.sub_b, sample.delta_b),
            self.spec_a,
            self.spec_b,
            self.coupling,
        )


@dataclass(frozen=True)
class ChannelObservation:
    value: complex
    timestamp: int = 0

    @property
    def power(self) -> float:
        return abs(self.value) ** 2


@dataclass(frozen=True)
class SuperpositionEstimate:
    estimate: complex
    measured: complex
    error_db: float


def surface_channel(sub: SubchannelSet, coeffs: ComplexArray) -> complex:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != (len(sub),):
        raise ContractError(f"{coeffs.size} coefficients for a {len(sub)}-element surface")
    return complex(np.sum(sub.h * coeffs * sub.g))


def _coupling_term(model: ChannelModel, coeffs_a: ComplexArray, coeffs_b: ComplexArray) -> ComplexArray | complex:
    t = model.coupling
    a_out = coeffs_a * model.sub_a.h
    b_out = coeffs_b * model.sub_b.h
    a_in = coeffs_a * model.sub_a.g
    b_in = coeffs_b * model.sub_b.g
    forward = np.sum((a_out @ t) * b_in, axis=-1)
    backward = np.sum((b_out @ t.T) * a_in, axis=-1)
    return forward + backward


def coupling_channel(model: ChannelModel, cfg_a: SurfaceConfig, cfg_b: SurfaceConfig) -> complex:
    if model.coupling is None:
        raise UnsupportedOperationError("channel model has no coupling matrix")
    coeffs_a = reflection_coefficients(model.spec_a, cfg_a)
    coeffs_b = reflection_coefficients(model.spec_b, cfg_b)
    return complex(_coupling_term(model, coeffs_a, coeffs_b))


def effective_channel(model: ChannelModel, cfg_a: SurfaceConfig, cfg_b: SurfaceConfig) -> complex:
    coeffs_a = reflection_coefficients(model.spec_a, cfg_a)
    coeffs_b = reflection_coefficients(model.spec_b, cfg_b)
    total = model.h_d + complex(coeffs_a @ model.combined_a) + complex(coeffs_b @ model.combined_b)
    if model.coupling is not None:
        total += complex(_coupling_term(model, coeffs_a, coeffs_b))
    return total


def evaluate_batch(model: ChannelModel, states_a: IntArray, states_b: IntArray) -> ComplexArray:
    """Effective channel for each row pair of two (N, L) state matrices."""
    states_a = np.asarray(states_a, dtype=np.int64)
    states_b = np.asarray(states_b, dtype=np.int64)
    if states_a.ndim != 2 or states_b.ndim != 2 or states_a.shape[0] != states_b.shape[0]:
        raise ContractError("batched evaluation needs two (N, L) state matrices with equal N")
    if states_a.shape[1] != model.spec_a.element_count or states_b.shape[1] != model.spec_b.element_count:
        raise ContractError("state matrix width does not match the surface element count")
    coeffs_a = model.spec_a.coefficient_table[states_a]
    coeffs_b = model.spec_b.coefficient_table[states_b]
    total = model.h_d + coeffs_a @ model.combined_a + coeffs_b @ model.combined_b
    if model.coupling is not None:
        total = total + _coupling_term(model, coeffs_a, coeffs_b)
    return np.asarray(total, dtype=np.complex128)


def observe(
    model: ChannelModel,
    cfg_a: SurfaceConfig,
    cfg_b: SurfaceConfig,
    noise_variance: float,
    stream: RandomStream,
    timestamp: int = 0,
) -> ChannelObservation:
    if noise_variance < 0:
        raise DomainError("noise_variance must be non-negative")
    value = effective_channel(model, cfg_a, cfg_b)
    if noise_variance > 0:
        value += sample_complex_gaussian(stream, noise_variance)
    return ChannelObservation(value=value, timestamp=timestamp)


def superposition_estimate(
    model: ChannelModel,
    cfg_a: SurfaceConfig,
    cfg_b: SurfaceConfig,
    ensemble_size: int,
    stream: RandomStream,
) -> SuperpositionEstimate:
    """Predict H_eff from per-surface ensemble averages: H_A + H_B - H_d."""
    if ensemble_size < 1:
        raise DomainError("ensemble_size must be >= 1")
    n = ensemble_size
    fixed_a = np.tile(cfg_a.state_indices, (n, 1))
    fixed_b = np.tile(cfg_b.state_indices, (n, 1))
    h_a = evaluate_batch(model, fixed_a, random_configs(model.spec_b, n, stream.child("ens", "B"))).mean()
    h_b = evaluate_batch(model, random_configs(model.spec_a, n, stream.child("ens", "A")), fixed_b).mean()
    h_0 = evaluate_batch(
        model,
        random_configs(model.spec_a, n, stream.child("ens", "dA")),
        random_configs(model.spec_b, n, stream.child("ens", "dB")),
    ).mean()
    estimate = complex(h_a + h_b - h_0)
    measured = effective_channel(model, cfg_a, cfg_b)
    if abs(estimate) == 0.0 or abs(measured) == 0.0:
        error_db = math.inf if abs(estimate) == 0.0 else -math.inf
    else:
        error_db = 20.0 * math.log10(abs(measured) / abs(estimate))
    return SuperpositionEstimate(estimate=estimate, measured=measured, error_db=error_db)


def spins_from_states(states: IntArray) -> IntArray:
    """Binary state 0 maps to spin +1, state 1 to spin -1."""
    return 1 - 2 * np.asarray(states, dtype=np.int64)


def states_from_spins(spins: IntArray) -> IntArray:
    return ((1 - np.asarray(spins, dtype=np.int64)) // 2).astype(np.int64)


def spin_coefficients(
    model: ChannelModel, party: str, other_config: SurfaceConfig
) -> tuple[complex, ComplexArray]:
    """(beta_0, beta) with H_eff = beta_0 + sum_l beta_l s_l for ``party``'s surface.

    The opponent is held at ``other_config``. Inactive elements are folded
    into beta_0 and get beta_l = 0.
    """
    spec = model.spec(party)
    if not spec.is_binary:
        raise UnsupportedOperationError("spin-affine form needs a binary surface")
    if model.coupling is not None:
        raise UnsupportedOperationError("spin-affine form does not hold with coupling")
    other = "B" if party == "A" else "A"
    other_coeffs = reflection_coefficients(model.spec(other), other_config)
    combined = model.sub(party).combined
    e0, e1 = spec.coefficient_table
    beta = combined * (e0 - e1) / 2.0
    beta0 = model.h_d + complex(other_coeffs @ model.sub(other).combined) + complex(np.sum(combined) * (e0 + e1) / 2.0)
    inactive = ~spec.active_mask
    if np.any(inactive):
        frozen_spins = spins_from_states(spec.frozen_states[inactive])
        beta0 += complex(np.sum(beta[inactive] * frozen_spins))
        beta = beta.copy()
        beta[inactive] = 0.0
    return beta0, beta


def realize(
    environment: Environment,
    tx_endpoint: str,
    rx_endpoint: str,
    stream: RandomStream,
    direct_attenuation_db: float = 0.0,
) -> ChannelModel:
    """Draw one channel realization between two endpoints."""
    geometry, params = environment.geometry, environment.params
    base = stream.child("frequency", int(round(geometry.frequency)))
    model = ChannelModel(
        direct=synthesize_direct_channel(geometry, params, tx_endpoint, rx_endpoint, base, direct_attenuation_db),
        sub_a=synthesize_subchannels(geometry, params, "A", tx_endpoint, rx_endpoint, base),
        sub_b=synthesize_subchannels(geometry, params, "B", tx_endpoint, rx_endpoint, base),
        spec_a=environment.spec("A"),
        spec_b=environment.spec("B"),
        coupling=synthesize_coupling(geometry, params),
    )
    logger.debug(
        "Realized %s->%s at %.4g Hz: |H_d|=%.3e, L_A=%d, L_B=%d",
        tx_endpoint,
        rx_endpoint,
        geometry.frequency,
        abs(model.h_d),
        len(model.sub_a),
        len(model.sub_b),
    )
    return model


def regenerate_for_frequency(
    environment: Environment,
    frequency: float,
    tx_endpoint: str,
    rx_endpoint: str,
    stream: RandomStream,
) -> ChannelModel:
    """Deterministic parts recomputed at the new wavelength, scatter redrawn per frequency."""
    if not frequency > 0:
        raise DomainError(f"frequency must be positive, got {frequency!r}")
    return realize(environment.with_frequency(frequency), tx_endpoint, rx_endpoint, stream)


def _pack(values: ComplexArray | complex) -> Any:
    arr = np.asarray(values, dtype=np.complex128)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def _unpack(payload: dict[str, Any]) -> ComplexArray:
    return np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)


def channel_to_dict(model: ChannelModel) -> dict[str, Any]:
    def spec_dict(spec: MetasurfaceSpec) -> dict[str, Any]:
        return {
            "element_count": spec.element_count,
            "phase_states": list(spec.phase_states),
            "active_mask": spec.active_mask.astype(int).tolist(),
            "frozen_states": spec.frozen_states.tolist(),
        }

    return {
        "direct": _pack(model.h_d),
        "sub_a": {"h": _pack(model.sub_a.h), "g": _pack(model.sub_a.g)},
        "sub_b": {"h": _pack(model.sub_b.h), "g": _pack(model.sub_b.g)},
        "spec_a": spec_dict(model.spec_a),
        "spec_b": spec_dict(model.spec_b),
        "coupling": None if model.coupling is None else _pack(model.coupling),
    }


def channel_from_dict(payload: dict[str, Any]) -> ChannelModel:
    def spec_from(d: dict[str, Any]) -> MetasurfaceSpec:
        return MetasurfaceSpec(
            element_count=d["element_count"],
            phase_states=tuple(d["phase_states"]),
            active_mask=np.asarray(d["active_mask"], dtype=bool),
            frozen_states=np.asarray(d["frozen_states"], dtype=np.int64),
        )

    coupling = payload.get("coupling")
    return ChannelModel(
        direct=DirectChannel(complex(_unpack(payload["direct"]))),
        sub_a=SubchannelSet(_unpack(payload["sub_a"]["h"]), _unpack(payload["sub_a"]["g"])),
        sub_b=SubchannelSet(_unpack(payload["sub_b"]["h"]), _unpack(payload["sub_b"]["g"])),
        spec_a=spec_from(payload["spec_a"]),
        spec_b=spec_from(payload["spec_b"]),
        coupling=None if coupling is None else _unpack(coupling).reshape(
            payload["spec_a"]["element_count"], payload["spec_b"]["element_count"]
        ),
    )


def dump_json(model: ChannelModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(channel_to_dict(model), indent=2))
    logger.info("Channel realization written to %s", path)
    return path
