"""Synthesis of the uncontrollable propagation world.

Every link is built from a deterministic line-of-sight part, fixed by
geometry and carrier frequency, mixed with a Rician scatter part drawn from
an explicit random stream. Surface-to-antenna hops are keyed by
``(surface, endpoint, frequency)`` so links sharing a hop see the same
scatter realization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..errors import ContractError, DomainError
from .mathcore import ComplexArray, FloatArray, RandomStream, sample_complex_gaussian
from .metasurface import MetasurfaceSpec

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_FREQUENCY = 5.5e9
SURFACE_IDS = ("A", "B")

_Z_AXIS = np.array([0.0, 0.0, 1.0])


def wavelength(frequency: float) -> float:
    if not frequency > 0:
        raise DomainError(f"carrier frequency must be positive, got {frequency!r}")
    return SPEED_OF_LIGHT / frequency


def default_spacing() -> float:
    """Half wavelength at 5.5 GHz."""
    return wavelength(DEFAULT_FREQUENCY) / 2.0


def path_amplitude(distance: float | FloatArray, wavelength_m: float, exponent: float) -> float | FloatArray:
    """Free-space style amplitude (lambda / 4 pi) * d^(-exponent / 2)."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DomainError("propagation distance must be positive")
    amp = wavelength_m / (4.0 * math.pi) * d ** (-exponent / 2.0)
    return float(amp) if amp.ndim == 0 else amp


def _unit(vector: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(vector, dtype=float).reshape(3)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DomainError(f"{what} must be a non-zero vector")
    return v / norm


def rotate_about_vertical(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rot @ np.asarray(vector, dtype=float)


@dataclass(frozen=True, eq=False)
class SurfacePlacement:
    center: np.ndarray
    normal: np.ndarray
    rows: int = 16
    cols: int = 16
    spacing: float = field(default_factory=default_spacing)

    def __post_init__(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise DomainError("surface rows and cols must be non-negative")
        if not self.spacing > 0:
            raise DomainError(f"element spacing must be positive, got {self.spacing!r}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "normal", _unit(self.normal, "surface normal"))

    @property
    def element_count(self) -> int:
        return self.rows * self.cols

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """In-plane unit vectors (horizontal u, vertical-ish v)."""
        u = np.cross(_Z_AXIS, self.normal)
        if np.linalg.norm(u) < 1e-12:
            u = np.array([1.0, 0.0, 0.0])
        u = u / np.linalg.norm(u)
        v = np.cross(self.normal, u)
        return u, v

    def element_positions(self) -> FloatArray:
        u, v = self.axes()
        i, j = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        di = (i.reshape(-1) - (self.rows - 1) / 2.0) * self.spacing
        dj = (j.reshape(-1) - (self.cols - 1) / 2.0) * self.spacing
        return self.center + np.outer(di, v) + np.outer(dj, u)

    def rotated(self, angle: float) -> SurfacePlacement:
        """Rotate the surface about the vertical axis through its center."""
        return replace(self, normal=rotate_about_vertical(self.normal, angle))

    def moved_to(self, anchor: np.ndarray, distance: float) -> SurfacePlacement:
        """Slide the surface along the anchor->center ray to ``distance`` from the anchor."""
        if not distance > 0:
            raise DomainError(f"distance must be positive, got {distance!r}")
        anchor = np.asarray(anchor, dtype=float)
        direction = _unit(self.center - anchor, "anchor-to-surface direction")
        return replace(self, center=anchor + direction * distance)

    def facing(self, target: np.ndarray) -> SurfacePlacement:
        return replace(self, normal=_unit(np.asarray(target, dtype=float) - self.center, "facing direction"))


@dataclass(frozen=True, eq=False)
class Geometry:
    endpoints: Mapping[str, np.ndarray]
    surfaces: Mapping[str, SurfacePlacement] = field(default_factory=dict)
    frequency: float = DEFAULT_FREQUENCY

    def __post_init__(self) -> None:
        wavelength(self.frequency)
        points = {name: np.asarray(p, dtype=float).reshape(3) for name, p in self.endpoints.items()}
        object.__setattr__(self, "endpoints", points)
        object.__setattr__(self, "surfaces", dict(self.surfaces))
        names = sorted(points)
        for n, first in enumerate(names):
            for second in names[n + 1 :]:
                if np.linalg.norm(points[first] - points[second]) <= 0:
                    raise DomainError(f"endpoints {first} and {second} coincide")
        for sid, placement in self.surfaces.items():
            if placement.element_count == 0:
                continue
            positions = placement.element_positions()
            for name, p in points.items():
                if np.min(np.linalg.norm(positions - p, axis=1)) <= 0:
                    raise DomainError(f"endpoint {name} lies on an element of surface {sid}")

    @property
    def wavelength(self) -> float:
        return wavelength(self.frequency)

    def endpoint(self, name: str) -> np.ndarray:
        try:
            return self.endpoints[name]
        except KeyError:
            raise ContractError(f"unknown endpoint {name!r}") from None

    def distance(self, first: str, second: str) -> float:
        return float(np.linalg.norm(self.endpoint(first) - self.endpoint(second)))

    def with_frequency(self, frequency: float) -> Geometry:
        return replace(self, frequency=frequency)

    def with_surface(self, surface_id: str, placement: SurfacePlacement | None) -> Geometry:
        surfaces = dict(self.surfaces)
        if placement is None:
            surfaces.pop(surface_id, None)
        else:
            surfaces[surface_id] = placement
        return replace(self, surfaces=surfaces)


@dataclass(frozen=True)
class MotionParams:
    ar_coefficient: float = 0.9
    perturbation_std: float = 0.0
    affected_fraction: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise DomainError(f"ar_coefficient must lie in [0, 1), got {self.ar_coefficient}")
        if self.perturbation_std < 0:
            raise DomainError("perturbation_std must be non-negative")
        if not 0.0 <= self.affected_fraction <= 1.0:
            raise DomainError("affected_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class PropagationParams:
    path_loss_exponent: float = 2.0
    rician_k: float = 5.0
    measurement_noise_variance: float = 0.0
    coupling_enabled: bool = False
    coupling_gain: float = 1.0
    # per-element aperture gain; multiplies the combined two-hop coefficient
    element_gain: float = 1.0
    scatter_scale: float = 1.0
    motion: MotionParams = field(default_factory=MotionParams)

    def __post_init__(self) -> None:
        if not 1.5 <= self.path_loss_exponent <= 4.0:
            raise DomainError(f"path_loss_exponent must lie in [1.5, 4], got {self.path_loss_exponent}")
        if self.rician_k < 0:
            raise DomainError("rician_k must be non-negative")
        if self.measurement_noise_variance < 0:
            raise DomainError("measurement_noise_variance must be non-negative")
        if self.element_gain <= 0 or self.coupling_gain < 0 or self.scatter_scale < 0:
            raise DomainError("gains and scatter_scale must be non-negative (element_gain positive)")


@dataclass(frozen=True, eq=False)
class SubchannelSet:
    h: ComplexArray
    g: ComplexArray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.complex128).reshape(-1)
        g = np.asarray(self.g, dtype=np.complex128).reshape(-1)
        if h.shape != g.shape:
            raise ContractError(f"h and g lengths differ ({h.size} vs {g.size})")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            raise DomainError("sub-channel coefficients must be finite")
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @classmethod
    def empty(cls) -> SubchannelSet:
        return cls(np.zeros(0, dtype=np.complex128), np.zeros(0, dtype=np.complex128))

    def __len__(self) -> int:
        return int(self.h.size)

    @property
    def combined(self) -> ComplexArray:
        """Per-element illumination a_l = h_l * g_l."""
        return self.h * self.g


@dataclass(frozen=True)
class DirectChannel:
    value: complex

    def __post_init__(self) -> None:
        value = complex(self.value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise DomainError("direct channel must be finite")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True, eq=False)
class Environment:
    geometry: Geometry
    params: PropagationParams = field(default_factory=PropagationParams)
    specs: Mapping[str, MetasurfaceSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        specs = dict(self.specs)
        for sid in SURFACE_IDS:
            placement = self.geometry.surfaces.get(sid)
            count = placement.element_count if placement is not None else 0
            spec = specs.get(sid)
            if spec is None:
                specs[sid] = MetasurfaceSpec.binary(count)
            elif spec.element_count != count:
                raise ContractError(
                    f"surface {sid} spec has {spec.element_count} elements, placement has {count}"
                )
        object.__setattr__(self, "specs", specs)

    def spec(self, surface_id: str) -> MetasurfaceSpec:
        return self.specs[surface_id]

    def with_frequency(self, frequency: float) -> Environment:
        return replace(self, geometry=self.geometry.with_frequency(frequency))

    def with_params(self, **changes: object) -> Environment:
        return replace(self, params=replace(self.params, **changes))

    def with_placement(self, surface_id: str, placement: SurfacePlacement) -> Environment:
        current = self.geometry.surfaces.get(surface_id)
        if current is None or current.element_count != placement.element_count:
            raise ContractError("placement changes must keep the surface element count")
        return replace(self, geometry=self.geometry.with_surface(surface_id, placement))


def hop_scatter_power(distance: float | FloatArray, wavelength_m: float, params: PropagationParams) -> float | FloatArray:
    """Scatter power of one surface-to-antenna hop."""
    amp = path_amplitude(distance, wavelength_m, params.path_loss_exponent)
    return np.asarray(amp) ** 2 * params.element_gain * params.scatter_scale


def _rician_mix(
    deterministic: ComplexArray | complex,
    scatter_power: FloatArray | float,
    rician_k: float,
    stream: RandomStream,
) -> ComplexArray | complex:
    if math.isinf(rician_k):
        return deterministic
    power = np.asarray(scatter_power, dtype=float)
    unit = sample_complex_gaussian(stream, 1.0, size=power.shape if power.ndim else None)
    scatter = np.sqrt(power) * unit
    los_weight = math.sqrt(rician_k / (rician_k + 1.0))
    nlos_weight = math.sqrt(1.0 / (rician_k + 1.0))
    mixed = los_weight * np.asarray(deterministic) + nlos_weight * scatter
    return complex(mixed) if power.ndim == 0 else mixed


def hop_coefficients(
    placement: SurfacePlacement,
    point: np.ndarray,
    wavelength_m: float,
    params: PropagationParams,
    stream: RandomStream | None,
) -> ComplexArray:
    """Coefficients between every element of ``placement`` and ``point``.

    With ``stream`` None only the deterministic part is returned.
    """
    positions = placement.element_positions()
    delta = np.asarray(point, dtype=float) - positions
    d = np.linalg.norm(delta, axis=1)
    if np.any(d <= 0):
        raise DomainError("an endpoint coincides with a surface element")
    cos_factor = np.maximum(0.0, (delta @ placement.normal) / d)
    amp = path_amplitude(d, wavelength_m, params.path_loss_exponent) * math.sqrt(params.element_gain)
    deterministic = amp * cos_factor * np.exp(-2j * math.pi * d / wavelength_m)
    if stream is None:
        return deterministic
    return _rician_mix(deterministic, hop_scatter_power(d, wavelength_m, params), params.rician_k, stream)


def synthesize_subchannels(
    geometry: Geometry,
    params: PropagationParams,
    surface_id: str,
    tx_endpoint: str,
    rx_endpoint: str,
    stream: RandomStream,
) -> SubchannelSet:
    placement = geometry.surfaces.get(surface_id)
    if placement is None or placement.element_count == 0:
        return SubchannelSet.empty()
    lam = geometry.wavelength
    h = hop_coefficients(
        placement, geometry.endpoint(tx_endpoint), lam, params, stream.child("hop", surface_id, tx_endpoint)
    )
    g = hop_coefficients(
        placement, geometry.endpoint(rx_endpoint), lam, params, stream.child("hop", surface_id, rx_endpoint)
    )
    return SubchannelSet(h=h, g=g)


def synthesize_direct_channel(
    geometry: Geometry,
    params: PropagationParams,
    tx_endpoint: str,
    rx_endpoint: str,
    stream: RandomStream,
    attenuation_db: float = 0.0,
) -> DirectChannel:
    d = geometry.distance(tx_endpoint, rx_endpoint)
    if d <= 0:
        raise DomainError(f"{tx_endpoint} and {rx_endpoint} coincide")
    lam = geometry.wavelength
    amp = path_amplitude(d, lam, params.path_loss_exponent)
    deterministic = amp * np.exp(-2j * math.pi * d / lam)
    pair = sorted((tx_endpoint, rx_endpoint))
    value = _rician_mix(deterministic, amp**2 * params.scatter_scale, params.rician_k, stream.child("direct", *pair))
    return DirectChannel(complex(value) * 10.0 ** (-attenuation_db / 20.0))


def synthesize_coupling(geometry: Geometry, params: PropagationParams) -> ComplexArray | None:
    """Inter-surface matrix t[k, l] (element k of A to element l of B), line of sight only."""
    place_a = geometry.surfaces.get("A")
    place_b = geometry.surfaces.get("B")
    if not params.coupling_enabled or place_a is None or place_b is None:
        return None
    pos_a = place_a.element_positions()
    pos_b = place_b.element_positions()
    delta = pos_b[None, :, :] - pos_a[:, None, :]
    d = np.linalg.norm(delta, axis=2)
    if np.any(d <= 0):
        raise DomainError("surfaces A and B overlap")
    cos_a = np.maximum(0.0, (delta @ place_a.normal) / d)
    cos_b = np.maximum(0.0, (-delta @ place_b.normal) / d)
    lam = geometry.wavelength
    amp = path_amplitude(d, lam, params.path_loss_exponent)
    return params.coupling_gain * amp * cos_a * cos_b * np.exp(-2j * math.pi * d / lam)


def motion_step(
    state: complex | ComplexArray, params: MotionParams, stream: RandomStream
) -> complex | ComplexArray:
    """One AR(1) update m(t+1) = rho m(t) + sqrt(1 - rho^2) CN(0, sigma^2)."""
    rho = params.ar_coefficient
    shape = np.shape(state)
    innovation = sample_complex_gaussian(stream, params.perturbation_std**2, size=shape if shape else None)
    return rho * state + math.sqrt(1.0 - rho**2) * innovation


@dataclass(frozen=True, eq=False)
class MotionSample:
    direct_factor: complex
    delta_a: ComplexArray
    delta_b: ComplexArray


class MotionProcess:
    """Human-motion perturbation of one link.

    The direct path is scaled by (1 + m(t)); a fixed random subset of each
    surface's elements gets an additive AR(1) term on its receive hop.
    States start in the stationary distribution.
    """

    def __init__(self, params: MotionParams, element_counts: tuple[int, int], stream: RandomStream) -> None:
        self._params = params
        self._stream = stream.child("motion-steps")
        pick = stream.child("motion-subset")
        self._subsets: list[np.ndarray] = []
        for count in element_counts:
            k = int(round(params.affected_fraction * count))
            self._subsets.append(np.sort(pick.rng.choice(count, size=k, replace=False)) if count else np.zeros(0, dtype=int))
        init = stream.child("motion-init")
        var = params.perturbation_std**2
        self._m = sample_complex_gaussian(init, var)
        self._element_m = [sample_complex_gaussian(init, var, size=s.size) for s in self._subsets]
        self._counts = element_counts

    @property
    def affected(self) -> tuple[np.ndarray, np.ndarray]:
        return self._subsets[0], self._subsets[1]

    def step(self) -> MotionSample:
        self._m = motion_step(self._m, self._params, self._stream)
        deltas = []
        for idx, (subset, count) in enumerate(zip(self._subsets, self._counts)):
            self._element_m[idx] = motion_step(self._element_m[idx], self._params, self._stream)
            delta = np.zeros(count, dtype=np.complex128)
            delta[subset] = self._element_m[idx]
            deltas.append(delta)
        return MotionSample(direct_factor=1.0 + complex(self._m), delta_a=deltas[0], delta_b=deltas[1])
