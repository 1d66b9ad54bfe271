import itertools
import math

import numpy as np
import pytest

from conftest import make_model
from mtsbattle.battle.optimizers import (
    BeamformOptimizer,
    FlipOptimizer,
    GreedyOptimizer,
    NullOptimizer,
    ObjectiveSense,
    ProbeLog,
    RandomSearchOptimizer,
    RegressionOptimizer,
    beamform_candidates,
    beamform_config,
    create_optimizer,
    regression_solve,
    solve_spin_model,
)
from mtsbattle.errors import ContractError, UnsupportedOperationError
from mtsbattle.physics.channel import ChannelObservation, effective_channel, evaluate_batch
from mtsbattle.physics.environment import PropagationParams, hop_coefficients
from mtsbattle.physics.mathcore import RandomStream
from mtsbattle.physics.metasurface import MetasurfaceSpec, SurfaceConfig, random_config

HELD_B = SurfaceConfig([0, 1, 0, 1, 1, 0, 0, 1])


def drive(opt, model, steps, seed=0):
    stream = RandomStream(seed)
    for _ in range(steps):
        cfg = opt.propose(stream)
        value = effective_channel(model, cfg, HELD_B)
        opt.feedback(cfg, abs(value) ** 2, ChannelObservation(value))


def power(model, cfg):
    return abs(effective_channel(model, cfg, HELD_B)) ** 2


def brute_force(model, sense):
    values = [power(model, SurfaceConfig(bits)) for bits in itertools.product((0, 1), repeat=8)]
    return max(values) if sense is ObjectiveSense.MAXIMIZE else min(values)


def test_sense_ties_are_not_improvements():
    assert not ObjectiveSense.MAXIMIZE.better(1.0, 1.0)
    assert not ObjectiveSense.MINIMIZE.better(1.0, 1.0)
    assert ObjectiveSense.MINIMIZE.better(0.5, 1.0)
    assert ObjectiveSense.MAXIMIZE.better(-1.0, None)
    assert ObjectiveSense.MAXIMIZE.opposite is ObjectiveSense.MINIMIZE


def test_propose_feedback_protocol():
    opt = GreedyOptimizer(MetasurfaceSpec.binary(8), ObjectiveSense.MAXIMIZE)
    stream = RandomStream(1)
    with pytest.raises(ContractError):
        opt.feedback(SurfaceConfig([0] * 8), 1.0)
    cfg = opt.propose(stream)
    with pytest.raises(ContractError):
        opt.propose(stream)
    with pytest.raises(ContractError):
        opt.feedback(SurfaceConfig([1] * 8), 1.0)
    opt.feedback(cfg, 1.0)
    assert opt.evaluations == 1


def test_first_proposal_is_start_config():
    start = SurfaceConfig([1, 0, 1, 0, 1, 0, 1, 0])
    spec = MetasurfaceSpec.binary(8)
    for kind in ("GD", "RD", "LR", "NO"):
        opt = create_optimizer(kind, spec, "maximize", start)
        assert opt.propose(RandomStream(2)) == start


def test_greedy_best_is_monotone_and_improves():
    model = make_model()
    opt = GreedyOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE)
    stream = RandomStream(3)
    history = []
    for _ in range(200):
        cfg = opt.propose(stream)
        opt.feedback(cfg, power(model, cfg))
        history.append(opt.best_score)
    assert all(b >= a for a, b in zip(history, history[1:]))
    assert history[-1] >= history[0]
    assert opt.current_config == opt.best_config


def test_greedy_mutation_size_bounds():
    spec = MetasurfaceSpec.binary(256)
    opt = GreedyOptimizer(spec, ObjectiveSense.MAXIMIZE)
    stream = RandomStream(4)
    base = SurfaceConfig(np.zeros(256, dtype=int))
    for _ in range(50):
        changed = base.differing_positions(opt.mutate(base, stream)).size
        assert 1 <= changed <= opt.mutation_max


def test_flip_converges_to_single_flip_optimum():
    model = make_model()
    opt = FlipOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE)
    drive(opt, model, 400)
    assert opt.converged
    held = power(model, opt.current_config)
    for position in range(8):
        flipped = opt.current_config.with_states([position], [1 - opt.current_config.state_indices[position]])
        assert power(model, flipped) <= held


def test_beamform_optimizer_holds_best_candidate():
    model = make_model()
    stream = RandomStream(5)
    candidates = [random_config(model.spec_a, stream) for _ in range(4)]
    opt = BeamformOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE, candidates=candidates)
    drive(opt, model, 10)
    assert opt.exhausted
    best = max(candidates, key=lambda c: power(model, c))
    assert opt.current_config == best


@pytest.mark.parametrize("sense", [ObjectiveSense.MAXIMIZE, ObjectiveSense.MINIMIZE])
def test_regression_finds_exact_optimum_without_noise(sense):
    model = make_model()
    opt = RegressionOptimizer(model.spec_a, sense)
    drive(opt, model, 40)
    assert opt.solved and not opt.rank_deficient
    assert power(model, opt.current_config) == pytest.approx(brute_force(model, sense))


def test_regression_falls_back_on_rank_deficiency():
    model = make_model()
    opt = RegressionOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE, probe_budget=3)
    drive(opt, model, 3)
    assert opt.solved and opt.rank_deficient
    assert opt.current_config in opt.probe_log.configs


def test_regression_needs_binary_surface():
    with pytest.raises(UnsupportedOperationError):
        RegressionOptimizer(MetasurfaceSpec.uniform(4, 4), ObjectiveSense.MAXIMIZE)
    with pytest.raises(ContractError):
        regression_solve(ProbeLog(), MetasurfaceSpec.binary(4), ObjectiveSense.MAXIMIZE)


def test_large_spin_model_improves_on_aligned_start():
    stream = RandomStream(6)
    beta = stream.rng.standard_normal(40) + 1j * stream.rng.standard_normal(40)
    beta0 = 0.5 + 0.5j
    spins = solve_spin_model(beta0, beta, ObjectiveSense.MAXIMIZE)
    aligned = np.where(np.cos(np.angle(beta) - np.angle(beta0)) >= 0, 1, -1)
    assert abs(beta0 + spins @ beta) >= abs(beta0 + aligned @ beta) - 1e-9
    low = solve_spin_model(beta0, beta, ObjectiveSense.MINIMIZE)
    assert abs(beta0 + low @ beta) < abs(beta0 + spins @ beta)


def test_random_search_keeps_best():
    model = make_model()
    opt = RandomSearchOptimizer(model.spec_a, ObjectiveSense.MINIMIZE)
    drive(opt, model, 30)
    assert opt.current_config == opt.best_config
    assert opt.best_score == pytest.approx(power(model, opt.best_config))


def test_null_optimizer_never_moves():
    start = SurfaceConfig([1] * 8)
    opt = NullOptimizer(MetasurfaceSpec.binary(8), ObjectiveSense.MAXIMIZE, start)
    drive(opt, make_model(), 5)
    assert opt.current_config == start


def test_create_optimizer_rejects_unknown_kind():
    with pytest.raises(ValueError):
        create_optimizer("XX", MetasurfaceSpec.binary(4), "maximize")


def test_beamform_config_aligns_illumination(geometry):
    spec = MetasurfaceSpec.binary(16)
    bob = geometry.endpoint("bob")
    cfg = beamform_config(geometry, spec, "A", "alice", bob)
    placement = geometry.surfaces["A"]
    los = PropagationParams(rician_k=math.inf)
    lam = geometry.wavelength
    illumination = hop_coefficients(placement, geometry.endpoint("alice"), lam, los, None) * hop_coefficients(
        placement, bob, lam, los, None
    )
    gain = abs(np.sum(illumination * spec.coefficient_table[cfg.state_indices]))
    assert gain >= 0.5 * np.sum(np.abs(illumination))
    beams = beamform_candidates(geometry, spec, "A", "alice", 5, RandomStream(7))
    assert len(beams) == 5 and all(len(b) == 16 for b in beams)
    assert beamform_candidates(geometry, spec, "A", "alice", 0, RandomStream(7)) == []


def test_greedy_remeasures_incumbent_after_rejection():
    opt = GreedyOptimizer(MetasurfaceSpec.binary(8), ObjectiveSense.MAXIMIZE)
    stream = RandomStream(6)
    start = opt.propose(stream)
    opt.feedback(start, 1.0)
    trial = opt.propose(stream)
    assert trial != start
    opt.feedback(trial, 0.8)

    # the channel moved: the incumbent is scored again before the next trial
    assert opt.propose(stream) == start
    opt.feedback(start, 0.5)
    assert opt.current_score == 0.5
    trial = opt.propose(stream)
    opt.feedback(trial, 0.7)
    assert opt.current_config == trial
    assert opt.restarts == 0


def test_greedy_restarts_only_on_a_static_landscape():
    model = make_model()
    optimum = max((SurfaceConfig(bits) for bits in itertools.product((0, 1), repeat=8)), key=lambda c: power(model, c))
    static = GreedyOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE, optimum, patience=4)
    drive(static, model, 200)
    assert static.restarts > 0
    assert static.current_config == optimum

    noisy = GreedyOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE, optimum, patience=4)
    stream = RandomStream(7)
    noise = RandomStream(8).rng
    for _ in range(200):
        cfg = noisy.propose(stream)
        noisy.feedback(cfg, power(model, cfg) * (1.0 + 0.01 * noise.standard_normal()))
    assert noisy.restarts == 0


def test_greedy_mutation_schedule_scales_with_size():
    assert GreedyOptimizer(MetasurfaceSpec.binary(2), ObjectiveSense.MAXIMIZE).mutation_max == 2
    assert GreedyOptimizer(MetasurfaceSpec.binary(10), ObjectiveSense.MAXIMIZE).mutation_max == 4
    assert GreedyOptimizer(MetasurfaceSpec.binary(256), ObjectiveSense.MAXIMIZE).mutation_max == 16


@pytest.mark.slow
def test_greedy_and_flip_against_enumeration():
    elements = 10
    states = np.array(list(itertools.product((0, 1), repeat=elements)), dtype=np.int64)
    held = SurfaceConfig([0] * elements)

    def power_of(model, cfg):
        return abs(effective_channel(model, cfg, held)) ** 2

    def climb(opt, model, steps, seed):
        stream = RandomStream(seed)
        for _ in range(steps):
            cfg = opt.propose(stream)
            opt.feedback(cfg, power_of(model, cfg))

    near_optimal = 0
    for seed in range(200):
        model = make_model(elements=elements, seed=seed)
        values = evaluate_batch(model, states, np.zeros_like(states))
        optimum = float(np.max(np.abs(values) ** 2))

        greedy = GreedyOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE)
        climb(greedy, model, 50 * elements, seed)
        near_optimal += power_of(model, greedy.current_config) >= 0.9 * optimum

        flip = FlipOptimizer(model.spec_a, ObjectiveSense.MAXIMIZE)
        climb(flip, model, 600, seed)
        level = power_of(model, flip.current_config)
        for position in range(elements):
            flipped = flip.current_config.with_states([position], [1 - flip.current_config.state_indices[position]])
            assert power_of(model, flipped) <= level
    assert near_optimal >= 190
