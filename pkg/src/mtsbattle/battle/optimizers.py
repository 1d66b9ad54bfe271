"""Configuration search strategies behind one propose/feedback contract.

Each optimizer owns exactly one surface. ``propose`` returns the next
configuration to apply, ``feedback`` reports the score measured for it.
Scores are objective-agnostic scalars; only the ``ObjectiveSense`` decides
what "better" means. Acceptance is strict everywhere: ties keep the held
configuration.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np

from ..errors import ContractError, DomainError, UnsupportedOperationError
from ..physics.channel import ChannelObservation, spins_from_states, states_from_spins
from ..physics.environment import Geometry, PropagationParams, hop_coefficients
from ..physics.mathcore import ComplexArray, RandomStream
from ..physics.metasurface import MetasurfaceSpec, SurfaceConfig, initial_config, random_config

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 16


class ObjectiveSense(str, enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"

    def better(self, candidate: float, reference: float | None) -> bool:
        if reference is None:
            return True
        if self is ObjectiveSense.MAXIMIZE:
            return candidate > reference
        return candidate < reference

    def pick(self, values: np.ndarray) -> int:
        return int(np.argmax(values) if self is ObjectiveSense.MAXIMIZE else np.argmin(values))

    @property
    def opposite(self) -> ObjectiveSense:
        return ObjectiveSense.MINIMIZE if self is ObjectiveSense.MAXIMIZE else ObjectiveSense.MAXIMIZE


class OptimizerKind(str, enum.Enum):
    GD = "GD"
    FL = "FL"
    BF = "BF"
    LR = "LR"
    RD = "RD"
    NO = "NO"


class Optimizer:
    """Shared bookkeeping: pending proposal, best-so-far and evaluation count."""

    kind: ClassVar[OptimizerKind]

    def __init__(self, spec: MetasurfaceSpec, sense: ObjectiveSense, initial: SurfaceConfig | None = None) -> None:
        self.spec = spec
        self.sense = sense
        self.current_config = initial if initial is not None else initial_config(spec)
        self.best_config = self.current_config
        self.best_score: float | None = None
        self.step_counter = 0
        self._pending: SurfaceConfig | None = None

    @property
    def evaluations(self) -> int:
        return self.step_counter

    def propose(self, stream: RandomStream) -> SurfaceConfig:
        if self._pending is not None:
            raise ContractError(f"{self.kind.value}: previous proposal still awaits feedback")
        self._pending = self._next(stream)
        return self._pending

    def feedback(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None = None) -> None:
        if self._pending is None:
            raise ContractError(f"{self.kind.value}: feedback without a pending proposal")
        if applied != self._pending:
            raise ContractError(f"{self.kind.value}: feedback for a configuration that was not proposed")
        self._pending = None
        self.step_counter += 1
        if self.sense.better(score, self.best_score):
            self.best_score = score
            self.best_config = applied
        self._absorb(applied, score, observation)

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        raise NotImplementedError

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        raise NotImplementedError


class NullOptimizer(Optimizer):
    kind = OptimizerKind.NO

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        return self.current_config

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        pass


class RandomSearchOptimizer(Optimizer):
    kind = OptimizerKind.RD

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        if self.step_counter == 0:
            return self.current_config
        return random_config(self.spec, stream)

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        self.current_config = self.best_config


class GreedyOptimizer(Optimizer):
    """Stochastic hill climbing with geometric multi-element mutations.

    After every rejected trial the incumbent is measured again, so the next
    comparison uses a fresh score even when the other surface or the
    channel has moved meanwhile. When ``patience`` consecutive re-measures
    return the identical score the landscape is static and the climb is
    stuck; a second climb then starts from a random configuration. The held
    configuration is replaced only by a strictly better one, so restarts
    never make it worse. Any change in a re-measured score ends the side
    climb and refreshes the held score.
    """

    kind = OptimizerKind.GD

    def __init__(
        self,
        spec: MetasurfaceSpec,
        sense: ObjectiveSense,
        initial: SurfaceConfig | None = None,
        mutation_mean: float | None = None,
        mutation_max: int | None = None,
        patience: int | None = None,
    ) -> None:
        super().__init__(spec, sense, initial)
        active = spec.active_count
        self.mutation_mean = mutation_mean if mutation_mean is not None else max(1.5, active / 64)
        self.mutation_max = mutation_max if mutation_max is not None else max(1, min(active, 4), active // 16)
        self.patience = patience if patience is not None else max(16, 2 * active)
        if self.mutation_mean < 1 or self.mutation_max < 1:
            raise DomainError("GD mutation mean and max must be >= 1")
        if self.patience < 1:
            raise DomainError("GD patience must be >= 1")
        self.current_score: float | None = None
        self.restarts = 0
        self._explorer: SurfaceConfig | None = None
        self._explorer_score: float | None = None
        self._remeasure = False
        self._restart = False
        self._stale = 0
        self._role = "held"

    @property
    def exploring(self) -> bool:
        return self._explorer is not None

    def mutation_size(self, stream: RandomStream) -> int:
        size = int(stream.rng.geometric(1.0 / self.mutation_mean))
        return max(1, min(size, self.mutation_max, self.spec.active_count))

    def mutate(self, config: SurfaceConfig, stream: RandomStream) -> SurfaceConfig:
        if self.spec.active_count == 0:
            return config
        size = self.mutation_size(stream)
        positions = stream.rng.choice(self.spec.active_indices, size=size, replace=False)
        states = config.state_indices[positions]
        shift = stream.rng.integers(1, self.spec.n_states, size=size)
        return config.with_states(positions, (states + shift) % self.spec.n_states)

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        if self.current_score is None:
            self._role = "held"
            return self.current_config
        if self._restart:
            self._restart = False
            self._stale = 0
            self.restarts += 1
            self._explorer = random_config(self.spec, stream)
            self._explorer_score = None
            self._role = "explorer"
            logger.debug("GD restart %d after %d unchanged re-measures", self.restarts, self.patience)
            return self._explorer
        if self._remeasure:
            self._role = "explorer" if self._explorer is not None else "held"
            return self._explorer if self._explorer is not None else self.current_config
        self._role = "trial"
        return self.mutate(self._explorer if self._explorer is not None else self.current_config, stream)

    def _count_stale(self) -> None:
        self._stale += 1
        if self._stale >= self.patience and self.spec.active_count > 0:
            self._restart = True

    def _adopt(self, config: SurfaceConfig, score: float) -> None:
        self.current_config = config
        self.current_score = score
        self._explorer = None
        self._explorer_score = None
        self._stale = 0

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        remeasured, self._remeasure = self._remeasure, False
        if self._role == "held":
            previous, self.current_score = self.current_score, score
            if previous is None or not remeasured:
                return
            if score != previous:
                self._stale = 0
            else:
                self._count_stale()
            return
        if self._role == "explorer":
            previous, self._explorer_score = self._explorer_score, score
            if previous is None:
                if self.sense.better(score, self.current_score):
                    self._adopt(applied, score)
                return
            if score != previous:
                # moved landscape: drop the side climb and refresh the held score
                self._explorer = None
                self._explorer_score = None
                self._stale = 0
                self.current_score = None
            else:
                self._count_stale()
            return
        if self._explorer is not None:
            if not self.sense.better(score, self._explorer_score):
                self._remeasure = True
            elif self.sense.better(score, self.current_score):
                self._adopt(applied, score)
            else:
                self._explorer = applied
                self._explorer_score = score
                self._stale = 0
            return
        if self.sense.better(score, self.current_score):
            self._adopt(applied, score)
        else:
            self._remeasure = True


class FlipOptimizer(Optimizer):
    """Element-wise testing: every state of the cursor element on consecutive steps."""

    kind = OptimizerKind.FL

    def __init__(self, spec: MetasurfaceSpec, sense: ObjectiveSense, initial: SurfaceConfig | None = None) -> None:
        super().__init__(spec, sense, initial)
        self.cursor = 0
        self._trial_state = 0
        self._scores: dict[int, float] = {}
        self._changed_in_sweep = False
        self.stable_sweeps = 0

    @property
    def element(self) -> int:
        return int(self.spec.active_indices[self.cursor]) if self.spec.active_count else -1

    @property
    def converged(self) -> bool:
        return self.stable_sweeps > 0

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        if self.spec.active_count == 0:
            return self.current_config
        return self.current_config.with_states([self.element], [self._trial_state])

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        if self.spec.active_count == 0:
            return
        self._scores[self._trial_state] = score
        self._trial_state += 1
        if self._trial_state < self.spec.n_states:
            return
        element = self.element
        held = int(self.current_config.state_indices[element])
        choice, choice_score = held, self._scores[held]
        for state, value in self._scores.items():
            if self.sense.better(value, choice_score):
                choice, choice_score = state, value
        if choice != held:
            self.current_config = self.current_config.with_states([element], [choice])
            self._changed_in_sweep = True
        self._scores.clear()
        self._trial_state = 0
        self.cursor += 1
        if self.cursor == self.spec.active_count:
            self.cursor = 0
            self.stable_sweeps = 0 if self._changed_in_sweep else self.stable_sweeps + 1
            self._changed_in_sweep = False


class BeamformOptimizer(Optimizer):
    """Scores precomputed beam configurations one per step, then holds the best."""

    kind = OptimizerKind.BF

    def __init__(
        self,
        spec: MetasurfaceSpec,
        sense: ObjectiveSense,
        initial: SurfaceConfig | None = None,
        candidates: Sequence[SurfaceConfig] = (),
    ) -> None:
        super().__init__(spec, sense, initial)
        self.candidates = list(candidates)
        self.cursor = 0

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.candidates)

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        if self.exhausted:
            return self.current_config
        return self.candidates[self.cursor]

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        if not self.exhausted:
            self.cursor += 1
        self.current_config = self.best_config


@dataclass
class ProbeLog:
    configs: list[SurfaceConfig] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    values: list[complex] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.configs)

    def append(self, config: SurfaceConfig, score: float, value: complex) -> None:
        self.configs.append(config)
        self.scores.append(score)
        self.values.append(value)


@dataclass
class RegressionFit:
    beta0: complex
    beta: ComplexArray
    rank_deficient: bool = False
    residual: float = 0.0


def _fitted_magnitudes(beta0: complex, beta: ComplexArray, spins: np.ndarray) -> np.ndarray:
    return np.abs(beta0 + spins @ beta)


def _all_spins(n: int) -> np.ndarray:
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return 1 - 2 * bits


def _refine_spins(beta0: complex, beta: ComplexArray, spins: np.ndarray, sense: ObjectiveSense) -> np.ndarray:
    spins = spins.copy()
    value = beta0 + complex(spins @ beta)
    for _ in range(10 * max(1, spins.size)):
        flipped = np.abs(value - 2.0 * beta * spins)
        pick = sense.pick(flipped)
        if not sense.better(float(flipped[pick]), abs(value)):
            break
        value -= 2.0 * beta[pick] * spins[pick]
        spins[pick] = -spins[pick]
    return spins


def solve_spin_model(beta0: complex, beta: ComplexArray, sense: ObjectiveSense) -> np.ndarray:
    """Spin vector extremizing |beta0 + sum beta_l s_l|."""
    n = beta.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n <= ENUMERATION_LIMIT:
        spins = _all_spins(n)
        return spins[sense.pick(_fitted_magnitudes(beta0, beta, spins))]
    reference = np.angle(beta0) if abs(beta0) > 0 else np.angle(np.sum(beta))
    aligned = np.where(np.cos(np.angle(beta) - reference) >= 0, 1, -1)
    start = aligned if sense is ObjectiveSense.MAXIMIZE else -aligned
    return _refine_spins(beta0, beta, start, sense)


def fit_spin_model(log: ProbeLog, spec: MetasurfaceSpec) -> RegressionFit | None:
    """Least-squares fit of value = beta0 + sum beta_l s_l over active spins; None if rank deficient."""
    active = spec.active_indices
    if len(log) < active.size + 1:
        return None
    states = np.stack([c.state_indices for c in log.configs])[:, active]
    design = np.column_stack([np.ones(len(log)), spins_from_states(states)]).astype(np.complex128)
    target = np.asarray(log.values, dtype=np.complex128)
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < active.size + 1:
        return None
    residual = float(np.linalg.norm(design @ coef - target))
    return RegressionFit(beta0=complex(coef[0]), beta=coef[1:], residual=residual)


def regression_solve(log: ProbeLog, spec: MetasurfaceSpec, sense: ObjectiveSense) -> tuple[SurfaceConfig, RegressionFit]:
    if not spec.is_binary:
        raise UnsupportedOperationError("regression search needs a binary surface")
    if len(log) == 0:
        raise ContractError("regression needs at least one probe")
    fit = fit_spin_model(log, spec)
    if fit is None:
        pick = sense.pick(np.asarray(log.scores))
        logger.warning(
            "Rank-deficient probe set (%d probes, %d active elements): falling back to best probe",
            len(log),
            spec.active_count,
        )
        return log.configs[pick], RegressionFit(beta0=0j, beta=np.zeros(spec.active_count, complex), rank_deficient=True)
    spins = solve_spin_model(fit.beta0, fit.beta, sense)
    template = log.configs[0]
    config = template.with_states(spec.active_indices, states_from_spins(spins))
    return config, fit


class RegressionOptimizer(Optimizer):
    """Random probes, spin-model least squares, then hold the solution."""

    kind = OptimizerKind.LR

    def __init__(
        self,
        spec: MetasurfaceSpec,
        sense: ObjectiveSense,
        initial: SurfaceConfig | None = None,
        probe_budget: int | None = None,
    ) -> None:
        if not spec.is_binary:
            raise UnsupportedOperationError("regression search needs a binary surface")
        super().__init__(spec, sense, initial)
        self.probe_budget = probe_budget if probe_budget is not None else 4 * spec.active_count
        self.probe_log = ProbeLog()
        self.fit: RegressionFit | None = None
        self.solved = False

    @property
    def rank_deficient(self) -> bool:
        return self.fit is not None and self.fit.rank_deficient

    def _next(self, stream: RandomStream) -> SurfaceConfig:
        if self.solved:
            return self.current_config
        if len(self.probe_log) == 0:
            return self.current_config
        return random_config(self.spec, stream)

    def _absorb(self, applied: SurfaceConfig, score: float, observation: ChannelObservation | None) -> None:
        if self.solved:
            return
        value = observation.value if observation is not None else complex(score)
        self.probe_log.append(applied, score, value)
        if len(self.probe_log) >= max(1, self.probe_budget):
            self.current_config, self.fit = regression_solve(self.probe_log, self.spec, self.sense)
            self.solved = True
            logger.debug("LR solved after %d probes (rank deficient: %s)", len(self.probe_log), self.fit.rank_deficient)
        else:
            self.current_config = self.best_config


def _nearest_states(phases: np.ndarray, spec: MetasurfaceSpec) -> np.ndarray:
    alphabet = np.asarray(spec.phase_states)
    diff = np.angle(np.exp(1j * (phases[:, None] - alphabet[None, :])))
    return np.argmin(np.abs(diff), axis=1)


def beamform_config(
    geometry: Geometry,
    spec: MetasurfaceSpec,
    surface_id: str,
    known_endpoint: str,
    focal_point: np.ndarray,
    offsets: int = 16,
) -> SurfaceConfig:
    """Configuration compensating the known-antenna and focal-point path phases."""
    placement = geometry.surfaces[surface_id]
    lam = geometry.wavelength
    los = PropagationParams(rician_k=math.inf)
    illumination = hop_coefficients(placement, geometry.endpoint(known_endpoint), lam, los, None) * hop_coefficients(
        placement, np.asarray(focal_point, dtype=float), lam, los, None
    )
    positions = placement.element_positions()
    d_known = np.linalg.norm(positions - geometry.endpoint(known_endpoint), axis=1)
    d_focus = np.linalg.norm(positions - np.asarray(focal_point, dtype=float), axis=1)
    compensation = 2.0 * math.pi * (d_known + d_focus) / lam
    active = spec.active_mask
    best_states, best_value = None, -1.0
    for k in range(offsets):
        states = np.where(active, _nearest_states(compensation + 2.0 * math.pi * k / offsets, spec), spec.frozen_states)
        value = abs(np.sum(illumination * spec.coefficient_table[states]))
        if value > best_value:
            best_states, best_value = states, value
    return SurfaceConfig(best_states)


def beamform_candidates(
    geometry: Geometry,
    spec: MetasurfaceSpec,
    surface_id: str,
    known_endpoint: str,
    n_directions: int,
    stream: RandomStream,
    focal_range: float = 3.0,
) -> list[SurfaceConfig]:
    """Beams toward random directions in front of the surface, seen from one known antenna."""
    if n_directions <= 0:
        return []
    placement = geometry.surfaces[surface_id]
    candidates = []
    for _ in range(n_directions):
        direction = stream.rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        if direction @ placement.normal < 0:
            direction = direction - 2.0 * (direction @ placement.normal) * placement.normal
        candidates.append(
            beamform_config(geometry, spec, surface_id, known_endpoint, placement.center + focal_range * direction)
        )
    return candidates


_OPTIMIZERS: dict[OptimizerKind, type[Optimizer]] = {
    OptimizerKind.GD: GreedyOptimizer,
    OptimizerKind.FL: FlipOptimizer,
    OptimizerKind.BF: BeamformOptimizer,
    OptimizerKind.LR: RegressionOptimizer,
    OptimizerKind.RD: RandomSearchOptimizer,
    OptimizerKind.NO: NullOptimizer,
}


def create_optimizer(
    kind: OptimizerKind | str,
    spec: MetasurfaceSpec,
    sense: ObjectiveSense | str,
    initial: SurfaceConfig | None = None,
    **params: object,
) -> Optimizer:
    kind = OptimizerKind(kind)
    sense = ObjectiveSense(sense)
    cls = _OPTIMIZERS[kind]
    return cls(spec, sense, initial, **params)
