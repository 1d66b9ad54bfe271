"""Closed-form oracle for battles without inter-surface coupling.

Notation: H'_d is the baseline a surface optimizes against, an error
phasor eta * exp(j phi_e) is the achieved surface channel relative to the
ideal aligned (maximizer) or anti-aligned (minimizer) target.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import DomainError, UndefinedSnrError
from ..physics.channel import ChannelModel, evaluate_batch
from ..physics.environment import SubchannelSet
from ..physics.mathcore import ComplexArray, FloatArray, RandomStream, sample_complex_gaussian, wrap_phase
from ..physics.metasurface import MetasurfaceSpec, random_config, random_configs

logger = logging.getLogger(__name__)

DEGRADATION_REGIME_LIMIT = 0.2


@dataclass(frozen=True)
class ErrorPhasor:
    eta: float
    phi_e: float = 0.0

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise DomainError(f"error phasor amplitude must be positive, got {self.eta!r}")

    @property
    def value(self) -> complex:
        return self.eta * cmath.exp(1j * self.phi_e)


@dataclass(frozen=True)
class GainReport:
    g_max: float
    g_min: float
    battle_gain: float
    r_max: float


@dataclass(frozen=True)
class DegradationSample:
    """Perturbation draws; one entry per draw."""

    e0: ComplexArray
    e1: ComplexArray
    h_e: ComplexArray

    @property
    def amp_error(self) -> FloatArray:
        return np.abs(self.h_e)

    @property
    def phase_error(self) -> FloatArray:
        return np.angle(self.h_e)


@dataclass(frozen=True)
class DegradationPrediction:
    amp_mean: float
    amp_std: float
    phase_mean: float
    phase_std: float
    in_regime: bool


@dataclass(frozen=True)
class MutualSnrEstimate:
    rho_a: float
    rho_b: float
    snr_b: float

    @property
    def snr_b_db(self) -> float:
        return 10.0 * math.log10(self.snr_b) if self.snr_b > 0 else -math.inf


def randomization_variance(sub: SubchannelSet) -> float:
    return float(np.sum(np.abs(sub.combined) ** 2))


def max_amplitude(sub: SubchannelSet) -> float:
    return float(np.sum(np.abs(sub.combined)))


def gain_min(err: ErrorPhasor) -> float:
    return 1.0 - 2.0 * err.eta * math.cos(err.phi_e) + err.eta**2


def gain_max(h_d_mag: float, h_max_mag: float, err: ErrorPhasor) -> float:
    if not h_d_mag > 0:
        raise DomainError("direct channel magnitude must be positive")
    return abs(h_d_mag + err.eta * h_max_mag * cmath.exp(1j * err.phi_e)) ** 2 / h_d_mag**2


def battle_gain(
    h_d_mag: float,
    h_max_a: float,
    err_a: ErrorPhasor,
    err_b: ErrorPhasor,
    eta_b_abs: float,
) -> float:
    """Post-battle power gain |1 + (|H^max'_A| / |H_d|) e^{j phi_A} - eta_B e^{j phi_B}|^2.

    ``eta_b_abs`` is the minimizer's relative amplitude eta_B, which falls
    below ``err_b.eta`` when its best amplitude |H^max'_B| / |H_d| cannot
    reach the direct path; ``err_b`` contributes the phase.
    """
    if not h_d_mag > 0:
        raise DomainError("direct channel magnitude must be positive")
    ratio = err_a.eta * h_max_a / h_d_mag
    return abs(1.0 + ratio * cmath.exp(1j * err_a.phi_e) - eta_b_abs * cmath.exp(1j * err_b.phi_e)) ** 2


def lemma_gain(r_max: float, phi_a: float, phi_b: float) -> float:
    """Equal-channel specialization |1 + r_max (e^{j phi_A} - e^{j phi_B})|^2."""
    return abs(1.0 + r_max * (cmath.exp(1j * phi_a) - cmath.exp(1j * phi_b))) ** 2


def gain_report(h_d_mag: float, h_max_a: float, err_a: ErrorPhasor, err_b: ErrorPhasor) -> GainReport:
    return GainReport(
        g_max=gain_max(h_d_mag, h_max_a, err_a),
        g_min=gain_min(err_b),
        battle_gain=battle_gain(h_d_mag, h_max_a, err_a, err_b, err_b.eta),
        r_max=h_max_a / h_d_mag,
    )


def _check_nonzero(*values: complex) -> None:
    for v in values:
        if abs(v) == 0:
            raise DomainError("baseline channel magnitude must be positive")


def degrade_minimizer(h_d0: complex, h_d1: complex, err: ErrorPhasor) -> ErrorPhasor:
    """Minimizer's error after its baseline moved from h_d0 to h_d1."""
    _check_nonzero(h_d0, h_d1)
    return ErrorPhasor(
        eta=err.eta * abs(h_d0) / abs(h_d1),
        phi_e=wrap_phase(cmath.phase(h_d0) - cmath.phase(h_d1) + err.phi_e),
    )


def degrade_maximizer(h_d0: complex, h_d1: complex, err: ErrorPhasor) -> ErrorPhasor:
    """Maximizer's error after its baseline moved: only the phase shifts."""
    _check_nonzero(h_d0, h_d1)
    return ErrorPhasor(eta=err.eta, phi_e=wrap_phase(cmath.phase(h_d0) - cmath.phase(h_d1) + err.phi_e))


def fit_error_phasor(achieved: complex, target: complex) -> ErrorPhasor:
    """(eta, phi_e) of an achieved surface channel relative to its ideal target."""
    _check_nonzero(achieved, target)
    return ErrorPhasor(eta=abs(achieved) / abs(target), phi_e=wrap_phase(cmath.phase(achieved) - cmath.phase(target)))


def maximizer_target(h_d_prime: complex, sub: SubchannelSet) -> complex:
    """Fully phase-aligned surface channel: sum |a_l| along arg H'_d."""
    _check_nonzero(h_d_prime)
    return max_amplitude(sub) * cmath.exp(1j * cmath.phase(h_d_prime))


def minimizer_target(h_d_prime: complex) -> complex:
    return -h_d_prime


def random_degradation_stats(sigma_m: float, h_d_mag: float) -> DegradationPrediction:
    """Predicted normals |H_e| ~ N(1, s^2), phi_e ~ N(0, s^2) with s = sigma_m / |H_d|."""
    if sigma_m < 0:
        raise DomainError("sigma_m must be non-negative")
    if not h_d_mag > 0:
        raise DomainError("direct channel magnitude must be positive")
    ratio = sigma_m / h_d_mag
    in_regime = ratio < DEGRADATION_REGIME_LIMIT
    if not in_regime:
        logger.warning(
            "sigma_m/|H_d| = %.3f is outside the small-perturbation regime (< %.1f); prediction is approximate",
            ratio,
            DEGRADATION_REGIME_LIMIT,
        )
    return DegradationPrediction(amp_mean=1.0, amp_std=ratio, phase_mean=0.0, phase_std=ratio, in_regime=in_regime)


def sample_degradation(h_d: complex, sigma_m: float, count: int, stream: RandomStream) -> DegradationSample:
    """Ratio channel H_e = (H_d + e1) / (H_d + e0) for independent e0, e1 ~ CN(0, sigma_m^2)."""
    _check_nonzero(h_d)
    e0 = sample_complex_gaussian(stream.child("e0"), sigma_m**2, size=count)
    e1 = sample_complex_gaussian(stream.child("e1"), sigma_m**2, size=count)
    return DegradationSample(e0=e0, e1=e1, h_e=(h_d + e1) / (h_d + e0))


def surface_degradation(model: ChannelModel, party: str, count: int, stream: RandomStream) -> DegradationSample:
    """Degradation samples produced by the surface's own random configurations."""
    spec = model.spec(party)
    other = "B" if party == "A" else "A"
    other_states = np.tile(random_config(model.spec(other), stream.child("fixed")).state_indices, (count, 1))
    draws = []
    for label in ("e0", "e1"):
        states = random_configs(spec, count, stream.child(label))
        values = evaluate_batch(model, states, other_states) if party == "A" else evaluate_batch(model, other_states, states)
        draws.append(values - model.h_d)
    e0, e1 = draws
    base = model.h_d
    return DegradationSample(e0=e0, e1=e1, h_e=(base + e1) / (base + e0))


def ks_distance(samples: Sequence[float] | FloatArray, mean: float, std: float) -> float:
    """Kolmogorov-Smirnov distance between samples and N(mean, std^2)."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise DomainError("ks_distance needs samples")
    if std == 0:
        return 0.0 if np.all(values == mean) else 1.0
    return float(stats.kstest(values, stats.norm(loc=mean, scale=std).cdf).statistic)


def standardized_surface_samples(
    sub: SubchannelSet, spec: MetasurfaceSpec, count: int, stream: RandomStream
) -> FloatArray:
    """Real and imaginary parts of random-configuration surface channels, scaled to unit variance."""
    sigma2 = randomization_variance(sub)
    if sigma2 == 0:
        raise DomainError("surface has no randomization variance")
    states = random_configs(spec, count, stream)
    values = spec.coefficient_table[states] @ sub.combined
    scale = math.sqrt(sigma2 / 2.0)
    return np.concatenate([values.real, values.imag]) / scale


def mutual_snr(
    seq_a: Sequence[float] | FloatArray,
    seq_b: Sequence[float] | FloatArray,
    seq_joint: Sequence[float] | FloatArray,
) -> MutualSnrEstimate:
    """Mean-removed matched filter: rho_X = <joint', X'>^2 / <X', X'>."""
    a, b, joint = (np.asarray(s, dtype=float) for s in (seq_a, seq_b, seq_joint))
    if not (a.size == b.size == joint.size) or a.size < 2:
        raise DomainError("mutual_snr needs three sequences of equal length >= 2")
    a, b, joint = a - a.mean(), b - b.mean(), joint - joint.mean()
    energy_a, energy_b = float(a @ a), float(b @ b)
    if energy_a == 0 or energy_b == 0:
        raise UndefinedSnrError("reference sequence has zero energy")
    rho_a = float(joint @ a) ** 2 / energy_a
    rho_b = float(joint @ b) ** 2 / energy_b
    if rho_a == 0:
        raise UndefinedSnrError("surface A has zero matched-filter energy in the joint sequence")
    return MutualSnrEstimate(rho_a=rho_a, rho_b=rho_b, snr_b=rho_b / rho_a)


def estimate_mutual_snr(model: ChannelModel, length: int, stream: RandomStream) -> MutualSnrEstimate:
    """Replay one random configuration sequence per surface, individually and jointly."""
    states_a = random_configs(model.spec_a, length, stream.child("seq", "A"))
    states_b = random_configs(model.spec_b, length, stream.child("seq", "B"))
    rest_a = np.tile(random_config(model.spec_a, stream.child("rest", "A")).state_indices, (length, 1))
    rest_b = np.tile(random_config(model.spec_b, stream.child("rest", "B")).state_indices, (length, 1))
    seq_a = np.abs(evaluate_batch(model, states_a, rest_b))
    seq_b = np.abs(evaluate_batch(model, rest_a, states_b))
    joint = np.abs(evaluate_batch(model, states_a, states_b))
    return mutual_snr(seq_a, seq_b, joint)
