"""Physical-layer secure transmission by configuration hopping, and the eavesdropper's counter.

Alice's surface A cycles through a small set of configurations that keep
Bob's channel nearly constant while rotating Eve's channel phase through
all QPSK quadrants. Both receivers demodulate against the channel seen on
the first (pilot) symbol, so Eve's decisions degrade to guessing. Eve's
own surface B fights back by pinning her channel phase across the set.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..battle.engine import EvaluationFn, channel_measure, optimize_single
from ..battle.optimizers import GreedyOptimizer, ObjectiveSense, Optimizer
from ..errors import ContractError, DomainError, SearchFailedError
from ..physics.channel import ChannelModel, ChannelObservation, effective_channel, evaluate_batch
from ..physics.mathcore import ComplexArray, FloatArray, RandomStream, circular_std, db, sample_complex_gaussian, wrap_phase
from ..physics.metasurface import IntArray, SurfaceConfig, random_config

logger = logging.getLogger(__name__)

# Gray mapping: neighbouring points differ in one bit
QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / math.sqrt(2.0)

POWER_BUDGET_DB = 0.45
PHASE_BUDGET_RAD = 0.2
PENALTY_WEIGHT = 10.0


def qpsk_modulate(symbols: Sequence[int] | IntArray) -> ComplexArray:
    return QPSK_POINTS[np.asarray(symbols, dtype=np.int64)]


def qpsk_decide(samples: ComplexArray) -> IntArray:
    """Quadrant decision: bit 0 from the real sign, bit 1 from the imaginary sign."""
    samples = np.asarray(samples)
    return (samples.real < 0).astype(np.int64) + 2 * (samples.imag < 0).astype(np.int64)


@dataclass(frozen=True, eq=False)
class QpskFrame:
    symbols: IntArray
    channels: ComplexArray

    def __post_init__(self) -> None:
        symbols = np.asarray(self.symbols, dtype=np.int64)
        channels = np.asarray(self.channels, dtype=np.complex128)
        if symbols.ndim != 1 or symbols.shape != channels.shape:
            raise ContractError("a frame needs one channel coefficient per symbol")
        if symbols.size and (symbols.min() < 0 or symbols.max() > 3):
            raise DomainError("QPSK symbols must lie in 0..3")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return self.symbols.size


def symbol_error_rate(frame: QpskFrame, noise_variance: float = 0.0, stream: RandomStream | None = None) -> float:
    """Fraction of non-pilot symbols decided wrongly against the pilot's channel estimate."""
    if len(frame) < 2:
        return 0.0
    received = frame.channels * qpsk_modulate(frame.symbols)
    if noise_variance > 0:
        if stream is None:
            raise ContractError("noisy demodulation needs a random stream")
        received = received + sample_complex_gaussian(stream, noise_variance, size=len(frame))
    reference = received[0] / QPSK_POINTS[frame.symbols[0]]
    if reference == 0:
        return 1.0
    decided = qpsk_decide(received[1:] / reference)
    return float(np.mean(decided != frame.symbols[1:]))


@dataclass(frozen=True)
class SerPair:
    ser_bob: float
    ser_eve: float


def protego_transmit(
    symbols: Sequence[int] | IntArray,
    bob_channels: ComplexArray,
    eve_channels: ComplexArray,
    noise_variance: float = 0.0,
    stream: RandomStream | None = None,
) -> SerPair:
    bob = QpskFrame(np.asarray(symbols), bob_channels)
    eve = QpskFrame(np.asarray(symbols), eve_channels)
    return SerPair(
        ser_bob=symbol_error_rate(bob, noise_variance, stream.child("bob") if stream else None),
        ser_eve=symbol_error_rate(eve, noise_variance, stream.child("eve") if stream else None),
    )


@dataclass(frozen=True, eq=False)
class ProtegoLinks:
    """Alice->Bob and Alice->Eve realizations sharing both surfaces."""

    bob: ChannelModel
    eve: ChannelModel

    def __post_init__(self) -> None:
        if self.bob.spec_a.element_count != self.eve.spec_a.element_count:
            raise ContractError("Bob and Eve links must share surface A")
        if self.bob.spec_b.element_count != self.eve.spec_b.element_count:
            raise ContractError("Bob and Eve links must share surface B")


@dataclass
class ProtegoSet:
    configs: list[SurfaceConfig]
    cfg_b: SurfaceConfig
    bob: ComplexArray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))
    eve: ComplexArray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def states(self) -> IntArray:
        return np.stack([c.state_indices for c in self.configs])

    @property
    def bob_power_spread_db(self) -> float:
        power = np.abs(self.bob) ** 2
        return db(float(power.max() / power.min())) if power.size else 0.0

    @property
    def bob_phase_spread(self) -> float:
        """Largest pairwise wrapped phase difference of Bob's channels."""
        phases = np.angle(self.bob)
        return float(np.max(np.abs(wrap_phase(phases[:, None] - phases[None, :])), initial=0.0))

    @property
    def eve_quadrants(self) -> IntArray:
        return np.floor(np.mod(np.angle(self.eve), 2.0 * math.pi) / (math.pi / 2)).astype(np.int64)


def _channels(links: ProtegoLinks, states_a: IntArray, cfg_b: SurfaceConfig) -> tuple[ComplexArray, ComplexArray]:
    states_b = np.tile(cfg_b.state_indices, (states_a.shape[0], 1))
    return evaluate_batch(links.bob, states_a, states_b), evaluate_batch(links.eve, states_a, states_b)


def protego_build_set(
    links: ProtegoLinks,
    cfg_b: SurfaceConfig,
    stream: RandomStream,
    set_size: int = 4,
    bob_steps: int = 3000,
    search_steps: int = 3000,
) -> ProtegoSet:
    """Optimize A toward Bob, then steer Eve's phase to each sector centre within Bob's budget.

    Members stay within 0.45 dB and 0.2 rad of the Bob-optimal channel, so
    the set spans under 1 dB and 0.5 rad on Bob's side. Member q puts Eve's
    phase near (q + 1/2) * 2 pi / set_size.
    """
    if set_size < 1:
        raise DomainError("set_size must be >= 1")
    spec = links.bob.spec_a
    start = random_config(spec, stream.child("start"))
    bob_opt = GreedyOptimizer(spec, ObjectiveSense.MAXIMIZE, start)
    measure = channel_measure(links.bob, "A", cfg_b, EvaluationFn("power"), 0.0, stream.child("noise"))
    best = optimize_single(bob_opt, measure, bob_steps, stream.child("bob")).final_config
    h_star = effective_channel(links.bob, best, cfg_b)
    logger.info("Bob-optimal configuration: |H_bob|^2 = %.3e", abs(h_star) ** 2)
    if set_size == 1:
        bob, eve = _channels(links, best.state_indices[None, :], cfg_b)
        return ProtegoSet(configs=[best], cfg_b=cfg_b, bob=bob, eve=eve)

    sector = 2.0 * math.pi / set_size
    tolerance = sector / 8.0

    def violation(h_bob: complex) -> float:
        power_off = abs(db(abs(h_bob) ** 2 / abs(h_star) ** 2)) if h_bob != 0 else math.inf
        phase_off = abs(wrap_phase(math.atan2(h_bob.imag, h_bob.real) - math.atan2(h_star.imag, h_star.real)))
        return max(0.0, power_off - POWER_BUDGET_DB) + max(0.0, phase_off - PHASE_BUDGET_RAD)

    configs: list[SurfaceConfig] = []
    failures: dict[str, object] = {}
    for q in range(set_size):
        centre = (q + 0.5) * sector

        def score(config: SurfaceConfig, t: int) -> tuple[float, ChannelObservation]:
            h_bob = effective_channel(links.bob, config, cfg_b)
            h_eve = effective_channel(links.eve, config, cfg_b)
            miss = abs(wrap_phase(math.atan2(h_eve.imag, h_eve.real) - centre))
            return miss + PENALTY_WEIGHT * violation(h_bob), ChannelObservation(h_eve, t)

        search = GreedyOptimizer(spec, ObjectiveSense.MINIMIZE, best)
        found = optimize_single(search, score, search_steps, stream.child("sector", q)).final_config
        h_bob = effective_channel(links.bob, found, cfg_b)
        h_eve = effective_channel(links.eve, found, cfg_b)
        miss = abs(wrap_phase(math.atan2(h_eve.imag, h_eve.real) - centre))
        if violation(h_bob) > 0 or miss > tolerance:
            failures[f"sector_{q}"] = {"eve_phase_miss": miss, "bob_violation": violation(h_bob)}
        configs.append(found)
    if failures:
        raise SearchFailedError(f"no admissible configuration for {len(failures)} of {set_size} sectors", failures)

    bob, eve = _channels(links, np.stack([c.state_indices for c in configs]), cfg_b)
    result = ProtegoSet(configs=configs, cfg_b=cfg_b, bob=bob, eve=eve)
    logger.info(
        "Protego set of %d: Bob spread %.2f dB / %.3f rad",
        set_size,
        result.bob_power_spread_db,
        result.bob_phase_spread,
    )
    return result


@dataclass
class ProtegoTransmission:
    symbols: IntArray
    members: IntArray
    bob: ComplexArray
    eve: ComplexArray

    def ser(self, noise_variance: float = 0.0, stream: RandomStream | None = None) -> SerPair:
        return protego_transmit(self.symbols, self.bob, self.eve, noise_variance, stream)


def protego_transmission(
    links: ProtegoLinks,
    protego_set: ProtegoSet,
    cfg_b: SurfaceConfig,
    n_symbols: int,
    stream: RandomStream,
) -> ProtegoTransmission:
    """Random symbols, each sent under a uniformly drawn member of the set."""
    if n_symbols < 1:
        raise DomainError("n_symbols must be >= 1")
    symbols = stream.child("symbols").rng.integers(0, 4, size=n_symbols)
    members = stream.child("members").rng.integers(0, len(protego_set), size=n_symbols)
    bob, eve = _channels(links, protego_set.states, cfg_b)
    return ProtegoTransmission(symbols=symbols, members=members, bob=bob[members], eve=eve[members])


@dataclass
class CounterattackResult:
    config_b: SurfaceConfig
    before: SerPair
    after: SerPair
    eve_phase_std: float
    believed: FloatArray = field(repr=False, default_factory=lambda: np.zeros(0))


def protego_counterattack(
    links: ProtegoLinks,
    protego_set: ProtegoSet,
    eve_optimizer: Optimizer,
    stream: RandomStream,
    steps: int = 3000,
    n_symbols: int = 10_000,
) -> CounterattackResult:
    """Eve's surface minimizes the circular std of her channel phase across the set.

    One evaluation observes Eve's channel under every member once.
    """
    states_a = protego_set.states

    def measure(config: SurfaceConfig, t: int) -> tuple[float, ChannelObservation]:
        eve = evaluate_batch(links.eve, states_a, np.tile(config.state_indices, (len(protego_set), 1)))
        return circular_std(np.angle(eve)), ChannelObservation(complex(eve[-1]), t)

    before = protego_transmission(links, protego_set, protego_set.cfg_b, n_symbols, stream.child("tx")).ser()
    run = optimize_single(eve_optimizer, measure, steps, stream.child("attack"))
    after = protego_transmission(links, protego_set, run.final_config, n_symbols, stream.child("tx")).ser()
    spread, _ = measure(run.final_config, steps)
    logger.info(
        "Counterattack: Eve SER %.3f -> %.3f, Bob SER %.3f -> %.3f",
        before.ser_eve,
        after.ser_eve,
        before.ser_bob,
        after.ser_bob,
    )
    return CounterattackResult(config_b=run.final_config, before=before, after=after, eve_phase_std=spread, believed=run.believed)
