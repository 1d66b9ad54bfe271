"""Two-party battles over one channel model.

A battle pits two optimizers with opposite objectives against a shared
channel. Every propose/feedback pair costs exactly one channel evaluation;
that count is the fairness currency between parties. Outcomes are judged
on the true (noiseless) channel power relative to a random-configuration
baseline.
"""
from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import ContractError, DomainError
from ..physics.channel import (
    ChannelModel,
    ChannelObservation,
    evaluate_batch,
    observe,
    regenerate_for_frequency,
)
from ..physics.environment import Environment
from ..physics.mathcore import ComplexArray, FloatArray, RandomStream, circular_std
from ..physics.metasurface import SurfaceConfig, mask_random_elements, random_config, random_configs
from .optimizers import ObjectiveSense, Optimizer, OptimizerKind, create_optimizer

logger = logging.getLogger(__name__)

DRAW_BAND_DB = 0.25
PARTIES = ("A", "B")

Measure = Callable[[SurfaceConfig, int], tuple[float, "ChannelObservation | None"]]


class BattleMode(str, enum.Enum):
    INDEPENDENT = "independent"
    REACTIVE = "reactive"
    SIMULTANEOUS = "simultaneous"


@dataclass(frozen=True)
class BattleSchedule:
    mode: BattleMode = BattleMode.SIMULTANEOUS
    pause_a: int = 1
    pause_b: int = 1
    total_steps: int = 2000
    baseline_trials: int = 1000
    noise_variance: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BattleMode(self.mode))
        if self.pause_a < 1 or self.pause_b < 1:
            raise DomainError("pause values must be >= 1")
        if self.total_steps < 0 or self.baseline_trials < 1:
            raise DomainError("total_steps must be >= 0 and baseline_trials >= 1")
        if self.noise_variance < 0:
            raise DomainError("noise_variance must be non-negative")

    def pause(self, party: str) -> int:
        return self.pause_a if party == "A" else self.pause_b


def _power(values: ComplexArray) -> float:
    return float(abs(values[-1]) ** 2)


def _phase_spread(values: ComplexArray) -> float:
    return circular_std(np.angle(values))


def _magnitude_std(values: ComplexArray) -> float:
    return float(np.std(np.abs(values)))


_EVALUATORS: dict[str, Callable[[ComplexArray], float]] = {
    "power": _power,
    "circular_phase_std": _phase_spread,
    "temporal_magnitude_std": _magnitude_std,
}


def register_evaluation(name: str, func: Callable[[ComplexArray], float]) -> None:
    _EVALUATORS[name] = func


def evaluation_names() -> list[str]:
    return sorted(_EVALUATORS)


@dataclass(frozen=True)
class EvaluationFn:
    """Named scalar functional over a party's most recent observations."""

    name: str = "power"
    window: int = 1

    def __post_init__(self) -> None:
        if self.name not in _EVALUATORS:
            raise DomainError(f"unknown evaluation function {self.name!r}")
        if self.window < 1:
            raise DomainError("evaluation window must be >= 1")

    def __call__(self, observations: Sequence[ChannelObservation]) -> float:
        if not observations:
            raise ContractError("evaluation needs at least one observation")
        values = np.fromiter((o.value for o in observations), dtype=np.complex128, count=len(observations))
        return _EVALUATORS[self.name](values)

    def history(self) -> deque[ChannelObservation]:
        return deque(maxlen=self.window)


@dataclass
class SingleRun:
    believed: FloatArray
    held: list[SurfaceConfig]
    final_config: SurfaceConfig
    best_score: float | None


def optimize_single(optimizer: Optimizer, measure: Measure, steps: int, stream: RandomStream) -> SingleRun:
    """Drive one optimizer for ``steps`` propose/feedback rounds against ``measure``."""
    believed = np.full(steps, np.nan)
    held: list[SurfaceConfig] = []
    for t in range(steps):
        config = optimizer.propose(stream)
        score, observation = measure(config, t)
        optimizer.feedback(config, score, observation)
        believed[t] = score
        held.append(optimizer.current_config)
    return SingleRun(believed=believed, held=held, final_config=optimizer.current_config, best_score=optimizer.best_score)


def channel_measure(
    model: ChannelModel,
    party: str,
    opponent_config: SurfaceConfig,
    evaluation: EvaluationFn,
    noise_variance: float,
    stream: RandomStream,
) -> Measure:
    """Measure for one party against an opponent frozen at ``opponent_config``."""
    history = evaluation.history()

    def measure(config: SurfaceConfig, t: int) -> tuple[float, ChannelObservation]:
        cfg_a, cfg_b = (config, opponent_config) if party == "A" else (opponent_config, config)
        observation = observe(model, cfg_a, cfg_b, noise_variance, stream, t)
        history.append(observation)
        return evaluation(history), observation

    return measure


def baseline_power(model: ChannelModel, trials: int, stream: RandomStream, chunk: int = 4096) -> tuple[float, float]:
    """Mean and std of |H_eff|^2 over independent uniform random configuration pairs."""
    if trials < 1:
        raise DomainError("baseline needs at least one trial")
    powers = []
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        block = stream.child("baseline", start)
        states_a = random_configs(model.spec_a, n, block.child("A"))
        states_b = random_configs(model.spec_b, n, block.child("B"))
        powers.append(np.abs(evaluate_batch(model, states_a, states_b)) ** 2)
    values = np.concatenate(powers)
    return float(values.mean()), float(values.std())


def gain_db(power: float, reference: float) -> float:
    if reference <= 0:
        raise DomainError("reference power must be positive")
    if power <= 0:
        return -math.inf
    return 10.0 * math.log10(power / reference)


@dataclass
class BattleOutcome:
    gain_db: float
    winner: str
    believed_gain_db: dict[str, float]
    final_power: float

    @staticmethod
    def judge(gain: float, senses: dict[str, ObjectiveSense]) -> str:
        if abs(gain) <= DRAW_BAND_DB:
            return "draw"
        wanted = ObjectiveSense.MAXIMIZE if gain > 0 else ObjectiveSense.MINIMIZE
        winners = [p for p in PARTIES if senses[p] is wanted]
        return winners[0] if len(winners) == 1 else "draw"


@dataclass
class BattleTrace:
    mode: BattleMode
    true_values: ComplexArray
    believed: dict[str, FloatArray]
    applied: dict[str, list[str]]
    final_configs: dict[str, SurfaceConfig]
    evaluations: dict[str, int]
    baseline_mean: float
    baseline_std: float

    def __len__(self) -> int:
        return int(self.true_values.size)

    def true_magnitude_db(self) -> FloatArray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.true_values))

    def rows(self) -> Iterator[dict[str, object]]:
        magnitude = self.true_magnitude_db()
        phase = np.angle(self.true_values)
        for t in range(len(self)):
            for party in PARTIES:
                yield {
                    "step": t,
                    "party": party,
                    "applied_config_hash": self.applied[party][t],
                    "believed_score": float(self.believed[party][t]),
                    "true_magnitude_db": float(magnitude[t]),
                    "true_phase_rad": float(phase[t]),
                }


TRACE_COLUMNS = ["step", "party", "applied_config_hash", "believed_score", "true_magnitude_db", "true_phase_rad"]


def _believed_gain(scores: FloatArray) -> float:
    finite = scores[np.isfinite(scores)]
    if finite.size == 0 or finite[0] <= 0 or finite[-1] <= 0:
        return math.nan
    return 10.0 * math.log10(finite[-1] / finite[0])


def _phased(
    model: ChannelModel,
    optimizers: dict[str, Optimizer],
    evaluations: dict[str, EvaluationFn],
    schedule: BattleSchedule,
    stream: RandomStream,
) -> tuple[dict[str, FloatArray], dict[str, list[SurfaceConfig]]]:
    """Independent and reactive modes: A's phase then B's phase."""
    steps_a = schedule.total_steps // 2
    steps = {"A": steps_a, "B": schedule.total_steps - steps_a}
    start = {p: optimizers[p].current_config for p in PARTIES}
    believed = {p: np.full(schedule.total_steps, np.nan) for p in PARTIES}
    held = {p: [start[p]] * schedule.total_steps for p in PARTIES}

    run_a = optimize_single(
        optimizers["A"],
        channel_measure(model, "A", start["B"], evaluations["A"], schedule.noise_variance, stream.child("noise", "A")),
        steps["A"],
        stream.child("propose", "A"),
    )
    believed["A"][:steps_a] = run_a.believed
    held["A"][:steps_a] = run_a.held

    opponent = start["A"] if schedule.mode is BattleMode.INDEPENDENT else run_a.final_config
    run_b = optimize_single(
        optimizers["B"],
        channel_measure(model, "B", opponent, evaluations["B"], schedule.noise_variance, stream.child("noise", "B")),
        steps["B"],
        stream.child("propose", "B"),
    )
    believed["B"][steps_a:] = run_b.believed
    held["B"][steps_a:] = run_b.held
    if steps_a and steps["B"]:
        believed["A"][steps_a:] = run_a.believed[-1]
    for t in range(steps_a, schedule.total_steps):
        held["A"][t] = opponent if schedule.mode is BattleMode.INDEPENDENT else run_a.final_config
    if schedule.mode is BattleMode.INDEPENDENT and schedule.total_steps:
        # final joint application of both optimized configurations
        held["A"][-1] = run_a.final_config
    return believed, held


def _simultaneous(
    model: ChannelModel,
    optimizers: dict[str, Optimizer],
    evaluations: dict[str, EvaluationFn],
    schedule: BattleSchedule,
    stream: RandomStream,
) -> tuple[dict[str, FloatArray], dict[str, list[SurfaceConfig]]]:
    current = {p: optimizers[p].current_config for p in PARTIES}
    believed = {p: np.full(schedule.total_steps, np.nan) for p in PARTIES}
    held: dict[str, list[SurfaceConfig]] = {p: [] for p in PARTIES}
    histories = {p: evaluations[p].history() for p in PARTIES}
    propose_streams = {p: stream.child("propose", p) for p in PARTIES}
    noise_streams = {p: stream.child("noise", p) for p in PARTIES}
    last = {p: math.nan for p in PARTIES}
    for t in range(schedule.total_steps):
        for p in PARTIES:
            if t % schedule.pause(p) == 0:
                opt = optimizers[p]
                trial = opt.propose(propose_streams[p])
                current[p] = trial
                observation = observe(model, current["A"], current["B"], schedule.noise_variance, noise_streams[p], t)
                histories[p].append(observation)
                last[p] = evaluations[p](histories[p])
                opt.feedback(trial, last[p], observation)
                current[p] = opt.current_config
            believed[p][t] = last[p]
        for p in PARTIES:
            held[p].append(current[p])
    return believed, held


def run_battle(
    model: ChannelModel,
    opt_a: Optimizer,
    opt_b: Optimizer,
    schedule: BattleSchedule,
    eval_a: EvaluationFn,
    eval_b: EvaluationFn,
    stream: RandomStream,
) -> tuple[BattleTrace, BattleOutcome]:
    if schedule.total_steps == 0:
        raise ContractError("a battle needs at least one step")
    optimizers = {"A": opt_a, "B": opt_b}
    evaluations = {"A": eval_a, "B": eval_b}
    if schedule.mode is BattleMode.SIMULTANEOUS:
        believed, held = _simultaneous(model, optimizers, evaluations, schedule, stream)
    else:
        believed, held = _phased(model, optimizers, evaluations, schedule, stream)

    states_a = np.stack([c.state_indices for c in held["A"]])
    states_b = np.stack([c.state_indices for c in held["B"]])
    true_values = evaluate_batch(model, states_a, states_b)
    base_mean, base_std = baseline_power(model, schedule.baseline_trials, stream.child("baseline"))
    final_power = float(abs(true_values[-1]) ** 2)
    gain = gain_db(final_power, base_mean)
    senses = {"A": opt_a.sense, "B": opt_b.sense}
    outcome = BattleOutcome(
        gain_db=gain,
        winner=BattleOutcome.judge(gain, senses),
        believed_gain_db={p: _believed_gain(believed[p]) for p in PARTIES},
        final_power=final_power,
    )
    trace = BattleTrace(
        mode=schedule.mode,
        true_values=true_values,
        believed=believed,
        applied={p: [c.digest() for c in held[p]] for p in PARTIES},
        final_configs={p: held[p][-1] for p in PARTIES},
        evaluations={p: optimizers[p].evaluations for p in PARTIES},
        baseline_mean=base_mean,
        baseline_std=base_std,
    )
    logger.debug(
        "Battle %s %s(%s) vs %s(%s): gain %.2f dB, winner %s",
        schedule.mode.value,
        opt_a.kind.value,
        opt_a.sense.value,
        opt_b.kind.value,
        opt_b.sense.value,
        gain,
        outcome.winner,
    )
    return trace, outcome


@dataclass(frozen=True)
class PartySetup:
    """Optimizer recipe for one party; built fresh per battle from a random start."""

    kind: OptimizerKind = OptimizerKind.GD
    sense: ObjectiveSense = ObjectiveSense.MAXIMIZE
    pause: int = 1
    evaluation: EvaluationFn = field(default_factory=EvaluationFn)
    params: dict[str, object] = field(default_factory=dict)

    def build(
        self,
        model: ChannelModel,
        party: str,
        stream: RandomStream,
        candidates: Sequence[SurfaceConfig] = (),
        initial: SurfaceConfig | None = None,
    ) -> Optimizer:
        spec = model.spec(party)
        start = initial if initial is not None else random_config(spec, stream.child("initial", party))
        extra = dict(self.params)
        if OptimizerKind(self.kind) is OptimizerKind.BF:
            extra["candidates"] = list(candidates)
        return create_optimizer(self.kind, spec, self.sense, start, **extra)


def battle_once(
    model: ChannelModel,
    setup_a: PartySetup,
    setup_b: PartySetup,
    schedule: BattleSchedule,
    stream: RandomStream,
    candidates: dict[str, Sequence[SurfaceConfig]] | None = None,
) -> tuple[BattleTrace, BattleOutcome]:
    candidates = candidates or {}
    opt_a = setup_a.build(model, "A", stream, candidates.get("A", ()))
    opt_b = setup_b.build(model, "B", stream, candidates.get("B", ()))
    return run_battle(model, opt_a, opt_b, schedule, setup_a.evaluation, setup_b.evaluation, stream.child("battle"))


def speed_cell(
    model: ChannelModel,
    setup_a: PartySetup,
    setup_b: PartySetup,
    schedule: BattleSchedule,
    pause_a: int,
    pause_b: int,
    stream: RandomStream,
) -> float:
    sched = BattleSchedule(
        mode=BattleMode.SIMULTANEOUS,
        pause_a=pause_a,
        pause_b=pause_b,
        total_steps=schedule.total_steps,
        baseline_trials=schedule.baseline_trials,
        noise_variance=schedule.noise_variance,
    )
    _, outcome = battle_once(model, setup_a, setup_b, sched, stream)
    return outcome.gain_db


def speed_matrix(
    model: ChannelModel,
    kind: OptimizerKind | str,
    pauses: Sequence[int],
    stream: RandomStream,
    schedule: BattleSchedule | None = None,
    trials: int = 1,
) -> FloatArray:
    """Median gain for every (pause_a, pause_b) pair; A maximizes, B minimizes."""
    if not pauses:
        raise DomainError("pauses must be non-empty")
    schedule = schedule or BattleSchedule()
    setup_a = PartySetup(kind=OptimizerKind(kind), sense=ObjectiveSense.MAXIMIZE)
    setup_b = PartySetup(kind=OptimizerKind(kind), sense=ObjectiveSense.MINIMIZE)
    grid = np.zeros((len(pauses), len(pauses)))
    for i, pa in enumerate(pauses):
        for j, pb in enumerate(pauses):
            gains = [
                speed_cell(model, setup_a, setup_b, schedule, pa, pb, stream.child("speed", i, j, k))
                for k in range(trials)
            ]
            grid[i, j] = float(np.median(gains))
    return grid


def algorithm_matrix(
    model: ChannelModel,
    kinds: Sequence[OptimizerKind | str],
    stream: RandomStream,
    schedule: BattleSchedule | None = None,
    trials: int = 1,
    candidates: dict[str, Sequence[SurfaceConfig]] | None = None,
) -> FloatArray:
    """Rows: maximizing kind for A; columns: minimizing kind for B."""
    schedule = schedule or BattleSchedule()
    grid = np.zeros((len(kinds), len(kinds)))
    for i, ka in enumerate(kinds):
        for j, kb in enumerate(kinds):
            setup_a = PartySetup(kind=OptimizerKind(ka), sense=ObjectiveSense.MAXIMIZE)
            setup_b = PartySetup(kind=OptimizerKind(kb), sense=ObjectiveSense.MINIMIZE)
            gains = [
                battle_once(model, setup_a, setup_b, schedule, stream.child("algo", i, j, k), candidates)[1].gain_db
                for k in range(trials)
            ]
            grid[i, j] = float(np.median(gains))
    return grid


def element_cell(
    model: ChannelModel,
    active_a: int,
    active_b: int,
    setup_a: PartySetup,
    setup_b: PartySetup,
    schedule: BattleSchedule,
    stream: RandomStream,
) -> float:
    spec_a = mask_random_elements(model.spec_a, model.spec_a.element_count - active_a, stream.child("mask", "A"))
    spec_b = mask_random_elements(model.spec_b, model.spec_b.element_count - active_b, stream.child("mask", "B"))
    _, outcome = battle_once(model.with_specs(spec_a, spec_b), setup_a, setup_b, schedule, stream)
    return outcome.gain_db


def element_matrix(
    model: ChannelModel,
    counts: Sequence[int],
    stream: RandomStream,
    schedule: BattleSchedule | None = None,
    trials: int = 1,
    kind: OptimizerKind | str = OptimizerKind.GD,
) -> FloatArray:
    """Median gain over all (active_a, active_b) pairs; A maximizes, B minimizes."""
    schedule = schedule or BattleSchedule()
    setup_a = PartySetup(kind=OptimizerKind(kind), sense=ObjectiveSense.MAXIMIZE)
    setup_b = PartySetup(kind=OptimizerKind(kind), sense=ObjectiveSense.MINIMIZE)
    grid = np.zeros((len(counts), len(counts)))
    for i, la in enumerate(counts):
        for j, lb in enumerate(counts):
            gains = [
                element_cell(model, la, lb, setup_a, setup_b, schedule, stream.child("elements", i, j, k))
                for k in range(trials)
            ]
            grid[i, j] = float(np.median(gains))
    return grid


@dataclass(frozen=True)
class VariationPoint:
    frequency: float
    direct_magnitude: float
    variance_a: float
    variance_b: float


def magnitude_variance(model: ChannelModel, party: str, trials: int, stream: RandomStream) -> float:
    """Variance of |H_eff| when only ``party`` draws random configurations."""
    other = "B" if party == "A" else "A"
    fixed = np.tile(random_config(model.spec(other), stream.child("fixed")).state_indices, (trials, 1))
    moving = random_configs(model.spec(party), trials, stream.child("moving"))
    values = evaluate_batch(model, moving, fixed) if party == "A" else evaluate_batch(model, fixed, moving)
    return float(np.var(np.abs(values)))


def channel_variation(
    environment: Environment,
    frequencies: Sequence[float],
    tx_endpoint: str,
    rx_endpoint: str,
    trials: int,
    stream: RandomStream,
) -> list[VariationPoint]:
    """Per-surface channel-magnitude variance across a carrier-frequency sweep."""
    points = []
    for k, frequency in enumerate(frequencies):
        model = regenerate_for_frequency(environment, frequency, tx_endpoint, rx_endpoint, stream)
        cell = stream.child("variation", k)
        points.append(
            VariationPoint(
                frequency=float(frequency),
                direct_magnitude=abs(model.h_d),
                variance_a=magnitude_variance(model, "A", trials, cell.child("A")),
                variance_b=magnitude_variance(model, "B", trials, cell.child("B")),
            )
        )
    return points
