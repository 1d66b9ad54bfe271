"""Sensing obfuscation by surface randomization, and an attacker's stabilizing surface.

Alice's surface A keeps redrawing random configurations (with periodic
inversions) so that the CSI Eve extracts fluctuates even when nobody
moves. Eve runs a sliding-std motion detector on the CSI magnitude in dB;
her own surface B tries to make that CSI insensitive to A.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import trapezoid

from ..battle.engine import optimize_single
from ..battle.optimizers import Optimizer
from ..errors import ContractError, DomainError
from ..physics.channel import ChannelModel, ChannelObservation, evaluate_batch
from ..physics.environment import MotionParams, MotionProcess, MotionSample
from ..physics.mathcore import FloatArray, RandomStream, sample_complex_gaussian
from ..physics.metasurface import IntArray, MetasurfaceSpec, SurfaceConfig, invert, random_config, random_configs

logger = logging.getLogger(__name__)

FALSE_ALARM_TARGET = 0.05
_DB_FLOOR = 1e-300


def irshield_stream(
    spec: MetasurfaceSpec,
    redraw_period: int | None,
    invert_period: int,
    steps: int,
    stream: RandomStream,
) -> IntArray:
    """(steps, L) state matrix of the obfuscating surface.

    A fresh uniform configuration is drawn every ``redraw_period`` steps
    (``None`` draws once). Between redraws the configuration alternates
    with its inversion; ``invert_period`` is the length of a full
    c -> inv(c) -> c cycle, so each half lasts max(1, invert_period // 2).
    """
    if redraw_period is not None and redraw_period < 1:
        raise DomainError("redraw_period must be >= 1")
    if invert_period < 1:
        raise DomainError("invert_period must be >= 1")
    if steps < 0:
        raise DomainError("steps must be non-negative")
    period = redraw_period or max(steps, 1)
    draws = random_configs(spec, -(-steps // period), stream) if steps else np.zeros((0, spec.element_count), dtype=np.int64)
    half = max(1, invert_period // 2)
    states = np.empty((steps, spec.element_count), dtype=np.int64)
    for t in range(steps):
        base = draws[t // period]
        k = t % period
        inverted = invert_period > 1 and (k // half) % 2 == 1
        states[t] = invert(spec, SurfaceConfig(base)).state_indices if inverted else base
    return states


@dataclass(frozen=True, eq=False)
class DetectionSeries:
    """CSI magnitudes with per-sample motion labels (``None`` when unlabeled)."""

    csi_magnitudes: FloatArray
    labels: np.ndarray | None
    window_length: int = 20
    log_scale: bool = True

    def __post_init__(self) -> None:
        mags = np.asarray(self.csi_magnitudes, dtype=float)
        if mags.ndim != 1:
            raise ContractError("CSI series must be one-dimensional")
        if self.window_length < 2 or self.window_length > mags.size:
            raise DomainError("window_length must lie in [2, series length]")
        object.__setattr__(self, "csi_magnitudes", mags)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=bool)
            if labels.shape != mags.shape:
                raise ContractError("one motion label per CSI sample is required")
            object.__setattr__(self, "labels", labels)

    @property
    def statistic(self) -> FloatArray:
        """Sliding standard deviation, one value per full window."""
        values = self.csi_magnitudes
        if self.log_scale:
            values = 20.0 * np.log10(np.maximum(values, _DB_FLOOR))
        return sliding_window_view(values, self.window_length).std(axis=1)

    @property
    def window_labels(self) -> np.ndarray:
        """1 for pure-motion windows, 0 for pure-static ones, -1 for mixed."""
        if self.labels is None:
            raise ContractError("motion detection needs labeled motion/static segments")
        windows = sliding_window_view(self.labels, self.window_length)
        out = np.full(windows.shape[0], -1, dtype=np.int64)
        out[windows.all(axis=1)] = 1
        out[~windows.any(axis=1)] = 0
        return out


@dataclass
class DetectionResult:
    detection_rate: float
    false_alarm_rate: float
    threshold: float
    roc_fpr: FloatArray = field(repr=False)
    roc_tpr: FloatArray = field(repr=False)

    @property
    def auc(self) -> float:
        return float(trapezoid(self.roc_tpr, self.roc_fpr))

    @property
    def roc_points(self) -> list[tuple[float, float]]:
        return list(zip(self.roc_fpr.tolist(), self.roc_tpr.tolist()))


def motion_detect(series: DetectionSeries, false_alarm: float = FALSE_ALARM_TARGET) -> DetectionResult:
    """Detection rate at a fixed false-alarm rate, plus the full ROC of the sliding-std detector."""
    labels = series.window_labels
    stat = series.statistic
    motion, static = stat[labels == 1], stat[labels == 0]
    if motion.size == 0 or static.size == 0:
        raise ContractError("detection needs at least one pure-motion and one pure-static window")
    threshold = float(np.quantile(static, 1.0 - false_alarm, method="higher"))
    candidates = np.concatenate([[np.inf], np.unique(stat)[::-1], [-np.inf]])
    fpr = np.array([np.mean(static > c) for c in candidates])
    tpr = np.array([np.mean(motion > c) for c in candidates])
    return DetectionResult(
        detection_rate=float(np.mean(motion > threshold)),
        false_alarm_rate=float(np.mean(static > threshold)),
        threshold=threshold,
        roc_fpr=fpr,
        roc_tpr=tpr,
    )


def motion_labels(steps: int, segment: int) -> np.ndarray:
    """Alternating static/motion segments, starting static."""
    if segment < 1:
        raise DomainError("segment length must be >= 1")
    return (np.arange(steps) // segment) % 2 == 1


def csi_series(
    model: ChannelModel,
    states_a: IntArray,
    cfg_b: SurfaceConfig,
    labels: np.ndarray,
    motion: MotionParams,
    noise_variance: float,
    stream: RandomStream,
) -> FloatArray:
    """|H(t)| observed by Eve while A follows ``states_a`` and a person moves where ``labels`` is set.

    Motion happens in the transmitter's room: every outgoing path is scaled
    by the direct-path factor, and A's elements get their own terms.
    """
    steps = states_a.shape[0]
    if labels.shape != (steps,):
        raise ContractError("one motion label per time step is required")
    process = MotionProcess(motion, (model.spec_a.element_count, model.spec_b.element_count), stream.child("motion"))
    no_b = np.zeros(model.spec_b.element_count, dtype=np.complex128)
    states_b = cfg_b.state_indices[None, :]
    values = np.empty(steps, dtype=np.complex128)
    still = evaluate_batch(model, states_a, np.tile(cfg_b.state_indices, (steps, 1)))
    for t in range(steps):
        if not labels[t]:
            values[t] = still[t]
            continue
        sample = process.step()
        moved = model.perturbed(MotionSample(direct_factor=1.0, delta_a=sample.delta_a, delta_b=no_b))
        values[t] = sample.direct_factor * evaluate_batch(moved, states_a[t : t + 1], states_b)[0]
    if noise_variance > 0:
        values = values + sample_complex_gaussian(stream.child("noise"), noise_variance, size=steps)
    return np.abs(values)


@dataclass(frozen=True)
class IrShieldSettings:
    steps: int = 4000
    segment: int = 200
    window: int = 20
    redraw_period: int | None = 16
    invert_period: int = 4
    training_configs: int = 64
    attacker_steps: int = 2000
    noise_variance: float = 0.0
    motion: MotionParams = field(default_factory=lambda: MotionParams(perturbation_std=0.05))


@dataclass
class IrShieldReport:
    baseline: DetectionResult
    shielded: DetectionResult
    attacked: DetectionResult
    cfg_b: SurfaceConfig
    believed: FloatArray = field(repr=False)

    @property
    def stages(self) -> dict[str, DetectionResult]:
        return {"baseline": self.baseline, "irshield": self.shielded, "attacker": self.attacked}


def stabilize(
    model: ChannelModel,
    training_states: IntArray,
    attacker: Optimizer,
    steps: int,
    stream: RandomStream,
    noise_variance: float = 0.0,
) -> tuple[SurfaceConfig, FloatArray]:
    """Surface B minimizes the dB spread of Eve's CSI across a fixed set of A configurations."""
    count = training_states.shape[0]
    if count < 2:
        raise DomainError("stabilizing needs at least two training configurations")
    noise = stream.child("noise")

    def measure(config: SurfaceConfig, t: int) -> tuple[float, ChannelObservation]:
        values = evaluate_batch(model, training_states, np.tile(config.state_indices, (count, 1)))
        if noise_variance > 0:
            values = values + sample_complex_gaussian(noise, noise_variance, size=count)
        spread = float(np.std(20.0 * np.log10(np.maximum(np.abs(values), _DB_FLOOR))))
        return spread, ChannelObservation(complex(values[-1]), t)

    run = optimize_single(attacker, measure, steps, stream.child("steps"))
    return run.final_config, run.believed


def irshield_experiment(
    model: ChannelModel,
    attacker: Optimizer,
    stream: RandomStream,
    settings: IrShieldSettings | None = None,
) -> IrShieldReport:
    """Detection rates for the unprotected, shielded and attacker-stabilized stages."""
    s = settings or IrShieldSettings()
    labels = motion_labels(s.steps, s.segment)
    static_a = np.tile(random_config(model.spec_a, stream.child("static", "A")).state_indices, (s.steps, 1))
    cfg_b = random_config(model.spec_b, stream.child("static", "B"))
    shield = irshield_stream(model.spec_a, s.redraw_period, s.invert_period, s.steps, stream.child("irshield"))

    def detect(states_a: IntArray, config_b: SurfaceConfig, stage: str) -> DetectionResult:
        # identical motion and noise realizations in every stage
        mags = csi_series(model, states_a, config_b, labels, s.motion, s.noise_variance, stream.child("csi"))
        result = motion_detect(DetectionSeries(mags, labels, s.window))
        logger.info("IRShield stage %s: detection %.2f at %.2f false alarm", stage, result.detection_rate, result.false_alarm_rate)
        return result

    baseline = detect(static_a, cfg_b, "baseline")
    shielded = detect(shield, cfg_b, "irshield")
    training = random_configs(model.spec_a, s.training_configs, stream.child("training"))
    stabilized, believed = stabilize(model, training, attacker, s.attacker_steps, stream.child("attacker"), s.noise_variance)
    attacked = detect(shield, stabilized, "attacker")
    return IrShieldReport(baseline=baseline, shielded=shielded, attacked=attacked, cfg_b=stabilized, believed=believed)


def config_autocorrelation(states: IntArray, spec: MetasurfaceSpec, max_lag: int) -> FloatArray:
    """Mean normalized correlation of reflection coefficients at lags 0..max_lag."""
    coeffs = spec.coefficient_table[states][:, spec.active_indices]
    n = coeffs.shape[0]
    if spec.active_count == 0 or n == 0:
        return np.zeros(max_lag + 1)
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        if lag >= n:
            out[lag] = math.nan
            continue
        prod = coeffs[: n - lag] * np.conj(coeffs[lag:])
        out[lag] = float(np.mean(prod).real)
    return out
