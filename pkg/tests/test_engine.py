import math

import numpy as np
import pytest

from conftest import make_model
from mtsbattle.battle.engine import (
    TRACE_COLUMNS,
    BattleMode,
    BattleOutcome,
    BattleSchedule,
    EvaluationFn,
    PartySetup,
    algorithm_matrix,
    baseline_power,
    battle_once,
    channel_measure,
    channel_variation,
    element_matrix,
    evaluation_names,
    gain_db,
    optimize_single,
    run_battle,
    speed_matrix,
)
from mtsbattle.battle.optimizers import GreedyOptimizer, NullOptimizer, ObjectiveSense, OptimizerKind
from mtsbattle.errors import ContractError, DomainError
from mtsbattle.physics.channel import ChannelModel, ChannelObservation, effective_channel
from mtsbattle.physics.mathcore import RandomStream, sample_complex_gaussian
from mtsbattle.physics.metasurface import SurfaceConfig

MAX, MIN = ObjectiveSense.MAXIMIZE, ObjectiveSense.MINIMIZE


def test_schedule_validation():
    with pytest.raises(DomainError):
        BattleSchedule(pause_a=0)
    with pytest.raises(DomainError):
        BattleSchedule(baseline_trials=0)
    assert BattleSchedule(mode="reactive").mode is BattleMode.REACTIVE


def test_evaluation_functions():
    assert {"power", "circular_phase_std", "temporal_magnitude_std"} <= set(evaluation_names())
    with pytest.raises(DomainError):
        EvaluationFn("nonsense")
    with pytest.raises(DomainError):
        EvaluationFn("power", window=0)
    observations = [ChannelObservation(1.0), ChannelObservation(2.0j)]
    assert EvaluationFn("power")(observations) == pytest.approx(4.0)
    assert EvaluationFn("temporal_magnitude_std")(observations) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        EvaluationFn()([])


def test_gain_and_judging():
    assert gain_db(10.0, 1.0) == pytest.approx(10.0)
    assert gain_db(0.0, 1.0) == -math.inf
    with pytest.raises(DomainError):
        gain_db(1.0, 0.0)
    senses = {"A": MAX, "B": MIN}
    assert BattleOutcome.judge(0.2, senses) == "draw"
    assert BattleOutcome.judge(3.0, senses) == "A"
    assert BattleOutcome.judge(-3.0, senses) == "B"
    assert BattleOutcome.judge(3.0, {"A": MAX, "B": MAX}) == "draw"


def test_baseline_is_reproducible(small_model):
    first = baseline_power(small_model, 500, RandomStream(2))
    second = baseline_power(small_model, 500, RandomStream(2))
    assert first == second
    assert first[0] > 0
    with pytest.raises(DomainError):
        baseline_power(small_model, 0, RandomStream(2))


def test_frozen_parties_leave_channel_constant(small_model):
    start_a, start_b = SurfaceConfig([1, 0] * 4), SurfaceConfig([0, 0, 1, 1] * 2)
    trace, outcome = run_battle(
        small_model,
        NullOptimizer(small_model.spec_a, MAX, start_a),
        NullOptimizer(small_model.spec_b, MIN, start_b),
        BattleSchedule(total_steps=12, baseline_trials=200),
        EvaluationFn(),
        EvaluationFn(),
        RandomStream(3),
    )
    expected = effective_channel(small_model, start_a, start_b)
    assert np.allclose(trace.true_values, expected)
    assert outcome.final_power == pytest.approx(abs(expected) ** 2)
    assert outcome.gain_db == pytest.approx(gain_db(abs(expected) ** 2, trace.baseline_mean))


def test_pauses_set_evaluation_counts(small_model):
    trace, _ = run_battle(
        small_model,
        GreedyOptimizer(small_model.spec_a, MAX),
        GreedyOptimizer(small_model.spec_b, MIN),
        BattleSchedule(pause_a=1, pause_b=3, total_steps=12, baseline_trials=100),
        EvaluationFn(),
        EvaluationFn(),
        RandomStream(4),
    )
    assert trace.evaluations == {"A": 12, "B": 4}
    assert len(trace) == 12
    rows = list(trace.rows())
    assert len(rows) == 24
    assert list(rows[0]) == TRACE_COLUMNS


@pytest.mark.parametrize("mode", [BattleMode.INDEPENDENT, BattleMode.REACTIVE])
def test_phased_modes_split_steps(small_model, mode):
    opt_a = GreedyOptimizer(small_model.spec_a, MAX)
    opt_b = GreedyOptimizer(small_model.spec_b, MIN)
    trace, _ = run_battle(
        small_model, opt_a, opt_b, BattleSchedule(mode=mode, total_steps=21, baseline_trials=100),
        EvaluationFn(), EvaluationFn(), RandomStream(5),
    )
    assert trace.evaluations == {"A": 10, "B": 11}
    assert trace.final_configs["A"] == opt_a.current_config
    assert trace.final_configs["B"] == opt_b.current_config
    assert np.isnan(trace.believed["B"][0]) and not np.isnan(trace.believed["B"][-1])


def test_zero_step_battle_is_rejected(small_model):
    with pytest.raises(ContractError):
        run_battle(
            small_model,
            NullOptimizer(small_model.spec_a, MAX),
            NullOptimizer(small_model.spec_b, MIN),
            BattleSchedule(total_steps=0),
            EvaluationFn(),
            EvaluationFn(),
            RandomStream(0),
        )


def test_battle_once_is_deterministic(small_model):
    setup_a = PartySetup(kind=OptimizerKind.GD, sense=MAX)
    setup_b = PartySetup(kind=OptimizerKind.RD, sense=MIN)
    schedule = BattleSchedule(total_steps=30, baseline_trials=100)
    one, out_one = battle_once(small_model, setup_a, setup_b, schedule, RandomStream(6))
    two, out_two = battle_once(small_model, setup_a, setup_b, schedule, RandomStream(6))
    assert np.array_equal(one.true_values, two.true_values)
    assert out_one.gain_db == out_two.gain_db


def test_unopposed_maximizer_beats_baseline():
    model = make_model(seed=21)
    setup_a = PartySetup(kind=OptimizerKind.GD, sense=MAX)
    setup_b = PartySetup(kind=OptimizerKind.NO, sense=MIN)
    _, outcome = battle_once(model, setup_a, setup_b, BattleSchedule(total_steps=300, baseline_trials=2000), RandomStream(7))
    assert outcome.gain_db > 0


def test_optimize_single_with_window(small_model):
    measure = channel_measure(
        small_model, "B", SurfaceConfig([0] * 8), EvaluationFn("temporal_magnitude_std", window=4), 0.0, RandomStream(1)
    )
    run = optimize_single(GreedyOptimizer(small_model.spec_b, MAX), measure, 15, RandomStream(2))
    assert run.believed.shape == (15,)
    assert run.believed[0] == 0.0
    assert len(run.held) == 15


def test_matrix_builders_have_grid_shape(small_model):
    schedule = BattleSchedule(total_steps=10, baseline_trials=50)
    speeds = speed_matrix(small_model, "GD", [1, 2], RandomStream(1), schedule)
    algos = algorithm_matrix(small_model, ["RD", "NO"], RandomStream(1), schedule)
    counts = element_matrix(small_model, [4, 8], RandomStream(1), schedule)
    for grid in (speeds, algos, counts):
        assert grid.shape == (2, 2)
        assert np.all(np.isfinite(grid))
    with pytest.raises(DomainError):
        speed_matrix(small_model, "GD", [], RandomStream(1))


def test_channel_variation_per_frequency(environment):
    points = channel_variation(environment, [5.3e9, 5.7e9], "alice", "bob", 100, RandomStream(3))
    assert [p.frequency for p in points] == [5.3e9, 5.7e9]
    assert all(p.variance_a > 0 and p.variance_b > 0 and p.direct_magnitude > 0 for p in points)


def equal_channel_model(elements: int, seed: int, direct: complex = 1.0) -> ChannelModel:
    stream = RandomStream(seed)
    h = sample_complex_gaussian(stream, 1.0, size=elements)
    g = sample_complex_gaussian(stream, 1.0, size=elements)
    return ChannelModel.from_arrays(direct, h, g, h, g)


def equal_channel_gains(battles: int, elements: int = 16, steps: int = 400) -> list[float]:
    setup_a = PartySetup(kind=OptimizerKind.GD, sense=MAX)
    setup_b = PartySetup(kind=OptimizerKind.GD, sense=MIN)
    schedule = BattleSchedule(total_steps=steps, baseline_trials=1000)
    return [
        battle_once(equal_channel_model(elements, seed), setup_a, setup_b, schedule, RandomStream(1000 + seed))[1].gain_db
        for seed in range(battles)
    ]


def test_minimizer_prevails_with_equal_channels():
    assert float(np.median(equal_channel_gains(30))) < 0


@pytest.mark.slow
def test_minimizer_prevails_over_many_equal_channel_battles():
    assert float(np.median(equal_channel_gains(200))) < 0
