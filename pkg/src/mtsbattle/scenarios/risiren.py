"""Sensing-event spoofing with a toggling surface, and its defense.

The attacker's surface B switches between a channel-maximizing and a
channel-minimizing configuration. A genetic search picks the switching
sequence whose |H(t)| spectrogram resembles a target activity. The
defender's surface A then minimizes the temporal spread of |H| while the
attacker keeps toggling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ..battle.engine import EvaluationFn, channel_measure, optimize_single
from ..battle.optimizers import GreedyOptimizer, ObjectiveSense, Optimizer
from ..errors import DomainError
from ..physics.channel import ChannelModel, ChannelObservation, effective_channel, evaluate_batch
from ..physics.mathcore import FloatArray, RandomStream, sample_complex_gaussian
from ..physics.metasurface import SurfaceConfig, random_config
from .spectrogram import (
    SpectrogramTarget,
    StftParams,
    doppler_band_energy,
    peak_frequency_track,
    similarity,
    spectrogram,
    toggle_from_track,
)

logger = logging.getLogger(__name__)


def activity_spectrogram(series: FloatArray, params: StftParams | None = None) -> SpectrogramTarget:
    """Spectrogram with every frame's mean removed: only the motion of |H| is matched.

    A constant series is silent here, and two silent spectrograms match
    perfectly, so a constant sequence reproduces a silent target.
    """
    return spectrogram(series, replace(params or StftParams(), detrend=True))


@dataclass(frozen=True)
class TogglePair:
    """Attacker toggle states and the victim channel each produces with A at ``victim``."""

    cfg_max: SurfaceConfig
    cfg_min: SurfaceConfig
    h_max: complex
    h_min: complex
    victim: SurfaceConfig

    @property
    def gap_db(self) -> float:
        if abs(self.h_min) == 0.0:
            return math.inf
        return 20.0 * math.log10(abs(self.h_max) / abs(self.h_min))


@dataclass(frozen=True)
class GaParams:
    population: int = 64
    generations: int = 200
    crossover_rate: float = 0.7
    mutation_rate: float | None = None
    elitism: int = 2
    tournament: int = 3
    fitness_goal: float = 0.8

    def __post_init__(self) -> None:
        if self.population < 2 or self.generations < 0:
            raise DomainError("GA needs population >= 2 and generations >= 0")
        if not 0 <= self.elitism < self.population:
            raise DomainError("elitism must be smaller than the population")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise DomainError("crossover_rate must lie in [0, 1]")
        if self.tournament < 1:
            raise DomainError("tournament size must be >= 1")


@dataclass
class GaResult:
    sequence: np.ndarray
    fitness: float
    history: FloatArray


@dataclass
class DefenseResult:
    config_a: SurfaceConfig
    residual_std: float
    undefended_std: float
    defended_energy: float
    undefended_energy: float
    believed: FloatArray

    @property
    def reduction_db(self) -> float:
        if self.residual_std == 0.0:
            return -math.inf
        if self.undefended_std == 0.0:
            return math.inf
        return 20.0 * math.log10(self.residual_std / self.undefended_std)

    @property
    def energy_ratio(self) -> float:
        if self.undefended_energy == 0.0:
            return 0.0 if self.defended_energy == 0.0 else math.inf
        return self.defended_energy / self.undefended_energy


def risiren_toggle_configs(
    model: ChannelModel,
    stream: RandomStream,
    steps: int = 2000,
    cfg_a: SurfaceConfig | None = None,
) -> TogglePair:
    """Greedy-optimized maximizing and minimizing configurations of surface B.

    ``model`` is the Alice->Bob link; surface A is held at ``cfg_a`` (random
    by default) while the attacker searches.
    """
    cfg_a = cfg_a if cfg_a is not None else random_config(model.spec_a, stream.child("victim"))
    found: dict[ObjectiveSense, SurfaceConfig] = {}
    for sense in ObjectiveSense:
        sub = stream.child("toggle", sense.value)
        optimizer = GreedyOptimizer(model.spec_b, sense, random_config(model.spec_b, sub.child("start")))
        measure = channel_measure(model, "B", cfg_a, EvaluationFn("power"), 0.0, sub.child("noise"))
        found[sense] = optimize_single(optimizer, measure, steps, sub).final_config
    pair = TogglePair(
        cfg_max=found[ObjectiveSense.MAXIMIZE],
        cfg_min=found[ObjectiveSense.MINIMIZE],
        h_max=effective_channel(model, cfg_a, found[ObjectiveSense.MAXIMIZE]),
        h_min=effective_channel(model, cfg_a, found[ObjectiveSense.MINIMIZE]),
        victim=cfg_a,
    )
    logger.info("Toggle configurations found: gap %.1f dB", pair.gap_db)
    return pair


def induced_series(bits: np.ndarray, pair: TogglePair) -> FloatArray:
    """|H(t)| seen by the victim while B follows ``bits``."""
    return np.where(np.asarray(bits, dtype=bool), abs(pair.h_max), abs(pair.h_min))


def target_length(target: SpectrogramTarget) -> int:
    p = target.params
    return (target.frames - 1) * p.hop + p.window


def _tournament(fitness: FloatArray, size: int, rng: np.random.Generator) -> int:
    contenders = rng.integers(0, fitness.size, size=size)
    return int(contenders[np.argmax(fitness[contenders])])


def risiren_synthesize(
    target: SpectrogramTarget,
    pair: TogglePair,
    stream: RandomStream,
    ga: GaParams | None = None,
) -> GaResult:
    """Genetic search for the switching sequence whose spectrogram best matches ``target``.

    Induced series are compared through ``activity_spectrogram``; build
    synthetic targets the same way.
    """
    ga = ga or GaParams()
    rng = stream.rng
    n = target_length(target)
    mutation = ga.mutation_rate if ga.mutation_rate is not None else 1.0 / n

    def fitness_of(bits: np.ndarray) -> float:
        return similarity(activity_spectrogram(induced_series(bits, pair), target.params), target)

    seeded = toggle_from_track(peak_frequency_track(target), target.params, n)
    population = rng.integers(0, 2, size=(ga.population, n), dtype=np.int8)
    population[0] = seeded
    fitness = np.array([fitness_of(ind) for ind in population])
    history = [float(fitness.max())]

    for generation in range(ga.generations):
        if history[-1] >= 1.0:
            break
        order = np.argsort(-fitness, kind="stable")
        children = [population[i].copy() for i in order[: ga.elitism]]
        while len(children) < ga.population:
            first = population[_tournament(fitness, ga.tournament, rng)].copy()
            second = population[_tournament(fitness, ga.tournament, rng)].copy()
            if n > 1 and rng.random() < ga.crossover_rate:
                cut = int(rng.integers(1, n))
                first[cut:], second[cut:] = second[cut:].copy(), first[cut:].copy()
            for child in (first, second):
                flips = rng.random(n) < mutation
                child[flips] ^= 1
                if len(children) < ga.population:
                    children.append(child)
        population = np.stack(children)
        fitness = np.array([fitness_of(ind) for ind in population])
        history.append(float(fitness.max()))
        logger.debug("GA generation %d: best fitness %.4f", generation + 1, history[-1])

    best = int(np.argmax(fitness))
    result = GaResult(sequence=population[best].copy(), fitness=float(fitness[best]), history=np.asarray(history))
    if result.fitness < ga.fitness_goal:
        logger.warning("GA best fitness %.3f is below the %.2f goal; returning best effort", result.fitness, ga.fitness_goal)
    else:
        logger.info("GA reached fitness %.3f after %d generations", result.fitness, len(history) - 1)
    return result


def _doppler_energy(series: FloatArray, stft: StftParams) -> float:
    if series.size < stft.window:
        return float(np.sum((series - series.mean()) ** 2))
    return doppler_band_energy(activity_spectrogram(series, stft))


def _attack_states(bits: np.ndarray, pair: TogglePair, start: int, count: int) -> np.ndarray:
    idx = (start + np.arange(count)) % bits.size
    return np.where(bits[idx, None].astype(bool), pair.cfg_max.state_indices, pair.cfg_min.state_indices)


def attack_series(
    model: ChannelModel,
    cfg_a: SurfaceConfig,
    bits: np.ndarray,
    pair: TogglePair,
    noise_variance: float,
    stream: RandomStream,
) -> FloatArray:
    """Observed |H(t)| over one pass of the attack sequence with A fixed at ``cfg_a``."""
    bits = np.asarray(bits, dtype=np.int8)
    states_b = _attack_states(bits, pair, 0, bits.size)
    states_a = np.tile(cfg_a.state_indices, (bits.size, 1))
    values = evaluate_batch(model, states_a, states_b)
    if noise_variance > 0:
        values = values + sample_complex_gaussian(stream, noise_variance, size=bits.size)
    return np.abs(values)


def risiren_defend(
    model: ChannelModel,
    attack_sequence: np.ndarray,
    pair: TogglePair,
    defender: Optimizer,
    stream: RandomStream,
    steps: int = 1500,
    window: int = 64,
    noise_variance: float = 0.0,
    stft: StftParams | None = None,
) -> DefenseResult:
    """Surface A minimizes the std of |H| over ``window`` packets while B keeps toggling.

    Each defender evaluation holds its proposal for one window of the
    cycling attack sequence.
    """
    if window < 2:
        raise DomainError("defense window must span at least two packets")
    bits = np.asarray(attack_sequence, dtype=np.int8)
    if bits.size == 0:
        raise DomainError("attack sequence is empty")
    start_config = defender.current_config
    noise = stream.child("measurement")

    def measure(config: SurfaceConfig, t: int) -> tuple[float, ChannelObservation]:
        states_b = _attack_states(bits, pair, t * window, window)
        values = evaluate_batch(model, np.tile(config.state_indices, (window, 1)), states_b)
        if noise_variance > 0:
            values = values + sample_complex_gaussian(noise, noise_variance, size=window)
        return float(np.std(np.abs(values))), ChannelObservation(complex(values[-1]), t)

    run = optimize_single(defender, measure, steps, stream.child("defense"))
    defended = attack_series(model, run.final_config, bits, pair, noise_variance, stream.child("residual"))
    undefended = attack_series(model, start_config, bits, pair, noise_variance, stream.child("residual"))
    stft = stft or StftParams()
    energies = [_doppler_energy(series, stft) for series in (defended, undefended)]
    result = DefenseResult(
        config_a=run.final_config,
        residual_std=float(np.std(defended)),
        undefended_std=float(np.std(undefended)),
        defended_energy=energies[0],
        undefended_energy=energies[1],
        believed=run.believed,
    )
    logger.info(
        "Defense finished: CSI std %.3e -> %.3e (%.1f dB)",
        result.undefended_std,
        result.residual_std,
        result.reduction_db,
    )
    return result
